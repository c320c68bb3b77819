use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of tensors. Implemented for `f32` and `f64`; the model
/// stack is instantiated at `f64` (see the crate-root aliases).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + 'static
{
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 convertible")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite or representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
