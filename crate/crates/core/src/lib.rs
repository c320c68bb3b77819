//! Sequence-pair classifier with attention and conflict interaction layers.
//!
//! The crate provides a small tape-based autodiff engine ([`tensor`]), a
//! stacked-GRU encoder ([`encoder`]), the attention/conflict/combined
//! interaction layer ([`interaction`]), the end-to-end pair classifier
//! ([`model`]), an Adam training loop ([`training`]) and corpus tooling
//! ([`data`]).

pub mod data;
pub mod encoder;
pub mod error;
pub mod gradcheck;
pub mod interaction;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Tensor at the default `f64` precision used by the model stack.
pub type Tensor = tensor::Tensor<f64>;
/// Tape at the default `f64` precision.
pub type Tape = tensor::Tape<f64>;

/// Single-precision variants, for callers that want them.
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape32 = tensor::Tape<f32>;
