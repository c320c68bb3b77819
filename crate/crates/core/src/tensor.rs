//! Dense 2-D tensors with tape-based reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a shared handle to an immutable value buffer plus an
//! optional gradient buffer. Operations are methods on a [`Tape`]; each one
//! computes the forward value eagerly and records a backward closure.
//! [`Tape::backward`] replays the closures in reverse order, accumulating
//! gradients with `+=` until [`Tensor::zero_grad`] is called.
//!
//! Scalars are represented as `1x1` tensors and vectors as `1xn` rows.
//! A tape and its tensors are single-threaded; parameters may be reused
//! across tapes (one tape per forward pass).

use std::cell::{Ref, RefCell, RefMut};
use std::rc::Rc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Inner<F: Scalar> {
    shape: Vec<usize>,
    requires_grad: bool,
    data: RefCell<Vec<F>>,
    grad: RefCell<Option<Vec<F>>>,
}

/// Shared handle to a tensor. Cloning clones the handle, not the buffer.
pub struct Tensor<F: Scalar = f64> {
    inner: Rc<Inner<F>>,
}

impl<F: Scalar> Clone for Tensor<F> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<F: Scalar> std::fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("data", &*self.data())
            .finish()
    }
}

impl<F: Scalar> Tensor<F> {
    fn new(shape: Vec<usize>, data: Vec<F>, requires_grad: bool) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Usage(format!(
                "shape {:?} incompatible with {} elements",
                shape,
                data.len()
            )));
        }
        let grad = if requires_grad {
            Some(vec![F::zero(); data.len()])
        } else {
            None
        };
        Ok(Tensor {
            inner: Rc::new(Inner {
                shape,
                requires_grad,
                data: RefCell::new(data),
                grad: RefCell::new(grad),
            }),
        })
    }

    /// Constant (non-trainable) tensor.
    pub fn constant(shape: &[usize], data: Vec<F>) -> Result<Self> {
        Self::new(shape.to_vec(), data, false)
    }

    /// Trainable leaf tensor with a zeroed gradient buffer.
    pub fn param(shape: &[usize], data: Vec<F>) -> Result<Self> {
        Self::new(shape.to_vec(), data, true)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(vec![rows, cols], vec![F::zero(); rows * cols], false).expect("valid shape")
    }

    pub fn scalar(v: F) -> Self {
        Self::new(vec![1, 1], vec![v], false).expect("valid shape")
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Usage("from_rows: no rows".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Usage("from_rows: ragged rows".into()));
        }
        let data: Vec<F> = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data, false)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    /// (rows, cols) of a 2-D tensor.
    pub fn dims2(&self) -> (usize, usize) {
        debug_assert_eq!(self.inner.shape.len(), 2);
        (self.inner.shape[0], self.inner.shape[1])
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<F>> {
        self.inner.data.borrow()
    }

    /// Mutable access to the value buffer. Only the optimizer and
    /// checkpoint loader should use this; tensors are otherwise immutable
    /// after creation.
    pub fn data_mut(&self) -> RefMut<'_, Vec<F>> {
        self.inner.data.borrow_mut()
    }

    pub fn item(&self) -> F {
        debug_assert_eq!(self.numel(), 1);
        self.data()[0]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        let (_, cols) = self.dims2();
        self.data()[i * cols + j]
    }

    /// Copy of the gradient buffer, if one exists.
    pub fn grad(&self) -> Option<Vec<F>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        if let Some(g) = self.inner.grad.borrow_mut().as_mut() {
            g.iter_mut().for_each(|x| *x = F::zero());
        }
    }

    fn add_to_grad(&self, delta: &[F]) {
        if let Some(g) = self.inner.grad.borrow_mut().as_mut() {
            debug_assert_eq!(g.len(), delta.len());
            for (gi, di) in g.iter_mut().zip(delta) {
                *gi += *di;
            }
        }
    }

    fn grad_snapshot(&self) -> Vec<F> {
        self.inner
            .grad
            .borrow()
            .clone()
            .unwrap_or_else(|| vec![F::zero(); self.numel()])
    }

    /// Two handles to the same underlying tensor?
    pub fn same(&self, other: &Tensor<F>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

fn dim_err<F: Scalar>(op: &'static str, a: &Tensor<F>, b: &Tensor<F>) -> Error {
    Error::Dimension {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

/// Records the backward pass of one forward execution.
pub struct Tape<F: Scalar = f64> {
    steps: RefCell<Vec<Box<dyn Fn()>>>,
    _scalar: std::marker::PhantomData<F>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            steps: RefCell::new(Vec::new()),
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record(&self, step: impl Fn() + 'static) {
        self.steps.borrow_mut().push(Box::new(step));
    }

    fn output(&self, shape: Vec<usize>, data: Vec<F>, track: bool) -> Tensor<F> {
        Tensor::new(shape, data, track).expect("op produced consistent shape")
    }

    /// Seeds `d loss / d loss = 1` and replays every recorded step in
    /// reverse, accumulating into the gradient buffers of all tracked
    /// ancestors.
    pub fn backward(&self, loss: &Tensor<F>) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        loss.add_to_grad(&[F::one()]);
        for step in self.steps.borrow().iter().rev() {
            step();
        }
        Ok(())
    }

    // ── linear algebra ──────────────────────────────────────────────

    /// `a[m×k] · b[k×n] -> [m×n]`.
    pub fn matmul(&self, a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, k) = a.dims2();
        let (k2, n) = b.dims2();
        if k != k2 {
            return Err(dim_err("matmul", a, b));
        }
        let mut out = vec![F::zero(); m * n];
        {
            let ad = a.data();
            let bd = b.data();
            for i in 0..m {
                for p in 0..k {
                    let aip = ad[i * k + p];
                    if aip == F::zero() {
                        continue;
                    }
                    for j in 0..n {
                        out[i * n + j] += aip * bd[p * n + j];
                    }
                }
            }
        }
        let track = a.requires_grad() || b.requires_grad();
        let out = self.output(vec![m, n], out, track);
        if track {
            let (a, b, o) = (a.clone(), b.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                if a.requires_grad() {
                    // a.grad += g · bᵀ
                    let bd = b.data();
                    let mut da = vec![F::zero(); m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                da[i * k + p] += gij * bd[p * n + j];
                            }
                        }
                    }
                    a.add_to_grad(&da);
                }
                if b.requires_grad() {
                    // b.grad += aᵀ · g
                    let ad = a.data();
                    let mut db = vec![F::zero(); k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            for j in 0..n {
                                db[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                    b.add_to_grad(&db);
                }
            });
        }
        Ok(out)
    }

    pub fn transpose(&self, a: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        let ad = a.data();
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = ad[i * n + j];
            }
        }
        drop(ad);
        let track = a.requires_grad();
        let out = self.output(vec![n, m], out, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let mut da = vec![F::zero(); m * n];
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] = g[j * m + i];
                    }
                }
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }

    // ── elementwise ─────────────────────────────────────────────────

    fn binary(
        &self,
        op: &'static str,
        a: &Tensor<F>,
        b: &Tensor<F>,
        fwd: impl Fn(F, F) -> F,
        // (grad_out, a_val, b_val) -> (d_a, d_b)
        bwd: impl Fn(F, F, F) -> (F, F) + 'static,
    ) -> Result<Tensor<F>> {
        if a.shape() != b.shape() {
            return Err(dim_err(op, a, b));
        }
        let data: Vec<F> = a
            .data()
            .iter()
            .zip(b.data().iter())
            .map(|(&x, &y)| fwd(x, y))
            .collect();
        let track = a.requires_grad() || b.requires_grad();
        let out = self.output(a.shape().to_vec(), data, track);
        if track {
            let (a, b, o) = (a.clone(), b.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let ad = a.data();
                let bd = b.data();
                let mut da = vec![F::zero(); g.len()];
                let mut db = vec![F::zero(); g.len()];
                for i in 0..g.len() {
                    let (x, y) = bwd(g[i], ad[i], bd[i]);
                    da[i] = x;
                    db[i] = y;
                }
                drop(ad);
                drop(bd);
                a.add_to_grad(&da);
                b.add_to_grad(&db);
            });
        }
        Ok(out)
    }

    pub fn add(&self, a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
        self.binary("add", a, b, |x, y| x + y, |g, _, _| (g, g))
    }

    pub fn sub(&self, a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
        self.binary("sub", a, b, |x, y| x - y, |g, _, _| (g, -g))
    }

    pub fn mul(&self, a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
        self.binary("mul", a, b, |x, y| x * y, |g, x, y| (g * y, g * x))
    }

    /// Broadcast add of a `1×n` row onto every row of an `m×n` matrix.
    /// The only broadcasting form supported; everything else must match
    /// shapes exactly.
    pub fn add_row(&self, a: &Tensor<F>, row: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        let (r, n2) = row.dims2();
        if r != 1 || n != n2 {
            return Err(dim_err("add_row", a, row));
        }
        let ad = a.data();
        let rd = row.data();
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = ad[i * n + j] + rd[j];
            }
        }
        drop(ad);
        drop(rd);
        let track = a.requires_grad() || row.requires_grad();
        let out = self.output(vec![m, n], out, track);
        if track {
            let (a, row, o) = (a.clone(), row.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                a.add_to_grad(&g);
                let mut dr = vec![F::zero(); n];
                for i in 0..m {
                    for j in 0..n {
                        dr[j] += g[i * n + j];
                    }
                }
                row.add_to_grad(&dr);
            });
        }
        Ok(out)
    }

    fn unary(
        &self,
        a: &Tensor<F>,
        fwd: impl Fn(F) -> F,
        // (grad_out, out_val) -> d_a; all our unary ops have backward
        // expressible through the output value
        bwd: impl Fn(F, F) -> F + 'static,
    ) -> Tensor<F> {
        let data: Vec<F> = a.data().iter().map(|&x| fwd(x)).collect();
        let track = a.requires_grad();
        let out = self.output(a.shape().to_vec(), data, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let od = o.data();
                let da: Vec<F> = g.iter().zip(od.iter()).map(|(&g, &y)| bwd(g, y)).collect();
                drop(od);
                a.add_to_grad(&da);
            });
        }
        out
    }

    pub fn tanh(&self, a: &Tensor<F>) -> Tensor<F> {
        self.unary(a, |x| x.tanh(), |g, y| g * (F::one() - y * y))
    }

    pub fn sigmoid(&self, a: &Tensor<F>) -> Tensor<F> {
        self.unary(
            a,
            |x| F::one() / (F::one() + (-x).exp()),
            |g, y| g * y * (F::one() - y),
        )
    }

    pub fn scale(&self, a: &Tensor<F>, c: F) -> Tensor<F> {
        self.unary(a, |x| x * c, move |g, _| g * c)
    }

    // ── softmax / loss ──────────────────────────────────────────────

    /// Row-wise softmax over all columns.
    pub fn softmax_rows(&self, a: &Tensor<F>) -> Result<Tensor<F>> {
        let (_, n) = a.dims2();
        self.softmax_rows_masked(a, n)
    }

    /// Row-wise softmax over the first `valid_cols` columns; the remaining
    /// columns get weight exactly zero. Max-subtraction keeps the exps
    /// finite for any finite input.
    pub fn softmax_rows_masked(&self, a: &Tensor<F>, valid_cols: usize) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        if valid_cols == 0 || valid_cols > n {
            return Err(Error::Data(format!(
                "softmax mask: {valid_cols} valid columns out of {n}"
            )));
        }
        let ad = a.data();
        if ad.iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("softmax input contains NaN".into()));
        }
        let mut out = vec![F::zero(); m * n];
        for i in 0..m {
            let row = &ad[i * n..i * n + valid_cols];
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let exps: Vec<F> = row.iter().map(|&x| (x - max).exp()).collect();
            let denom: F = exps.iter().copied().sum();
            for j in 0..valid_cols {
                out[i * n + j] = exps[j] / denom;
            }
        }
        drop(ad);
        let track = a.requires_grad();
        let out = self.output(vec![m, n], out, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let s = o.data();
                let mut da = vec![F::zero(); m * n];
                for i in 0..m {
                    // dot = Σ_k g_k s_k over valid columns
                    let mut dot = F::zero();
                    for k in 0..valid_cols {
                        dot += g[i * n + k] * s[i * n + k];
                    }
                    for j in 0..valid_cols {
                        da[i * n + j] = s[i * n + j] * (g[i * n + j] - dot);
                    }
                }
                drop(s);
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }

    /// Mean negative log-softmax of the true class, computed in log space.
    /// Returns a `1×1` tensor.
    pub fn cross_entropy_logits(&self, logits: &Tensor<F>, labels: &[usize]) -> Result<Tensor<F>> {
        let (m, c) = logits.dims2();
        if labels.len() != m {
            return Err(Error::Usage(format!(
                "{} labels for {} logit rows",
                labels.len(),
                m
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Data(format!("label {bad} out of range (classes {c})")));
        }
        let ld = logits.data();
        if ld.iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("cross-entropy input contains NaN".into()));
        }
        let batch = F::of(m as f64);
        let mut total = F::zero();
        for (i, &label) in labels.iter().enumerate() {
            let row = &ld[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let lse: F = row.iter().map(|&x| (x - max).exp()).sum::<F>().ln() + max;
            total += lse - row[label];
        }
        drop(ld);
        let track = logits.requires_grad();
        let out = self.output(vec![1, 1], vec![total / batch], track);
        if track {
            let (logits2, o) = (logits.clone(), out.clone());
            let labels = labels.to_vec();
            self.record(move || {
                let g = o.grad_snapshot()[0];
                let ld = logits2.data();
                let mut dl = vec![F::zero(); m * c];
                for (i, &label) in labels.iter().enumerate() {
                    let row = &ld[i * c..(i + 1) * c];
                    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
                    let exps: Vec<F> = row.iter().map(|&x| (x - max).exp()).collect();
                    let denom: F = exps.iter().copied().sum();
                    for j in 0..c {
                        let soft = exps[j] / denom;
                        let ind = if j == label { F::one() } else { F::zero() };
                        dl[i * c + j] = g * (soft - ind) / batch;
                    }
                }
                drop(ld);
                logits2.add_to_grad(&dl);
            });
        }
        Ok(out)
    }

    // ── shape ops ───────────────────────────────────────────────────

    /// Concatenate 2-D tensors along `axis` (0 = rows, 1 = cols).
    pub fn concat(&self, tensors: &[Tensor<F>], axis: usize) -> Result<Tensor<F>> {
        if tensors.is_empty() {
            return Err(Error::Usage("concat of zero tensors".into()));
        }
        if axis > 1 {
            return Err(Error::Usage(format!("concat axis {axis} (2-D only)")));
        }
        let (r0, c0) = tensors[0].dims2();
        for t in &tensors[1..] {
            let (r, c) = t.dims2();
            let ok = if axis == 0 { c == c0 } else { r == r0 };
            if !ok {
                return Err(dim_err("concat", &tensors[0], t));
            }
        }
        let (rows, cols, data) = if axis == 0 {
            let rows: usize = tensors.iter().map(|t| t.dims2().0).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for t in tensors {
                data.extend_from_slice(&t.data());
            }
            (rows, c0, data)
        } else {
            let cols: usize = tensors.iter().map(|t| t.dims2().1).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for t in tensors {
                    let (_, c) = t.dims2();
                    data.extend_from_slice(&t.data()[i * c..(i + 1) * c]);
                }
            }
            (r0, cols, data)
        };
        let track = tensors.iter().any(Tensor::requires_grad);
        let out = self.output(vec![rows, cols], data, track);
        if track {
            let parts: Vec<Tensor<F>> = tensors.to_vec();
            let o = out.clone();
            self.record(move || {
                let g = o.grad_snapshot();
                if axis == 0 {
                    let mut offset = 0;
                    for t in &parts {
                        let len = t.numel();
                        t.add_to_grad(&g[offset..offset + len]);
                        offset += len;
                    }
                } else {
                    let mut col_offset = 0;
                    for t in &parts {
                        let (r, c) = t.dims2();
                        let mut dt = vec![F::zero(); r * c];
                        for i in 0..r {
                            for j in 0..c {
                                dt[i * c + j] = g[i * cols + col_offset + j];
                            }
                        }
                        t.add_to_grad(&dt);
                        col_offset += c;
                    }
                }
            });
        }
        Ok(out)
    }

    /// Row `i` of a matrix as a `1×n` tensor.
    pub fn select_row(&self, a: &Tensor<F>, i: usize) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        if i >= m {
            return Err(Error::Usage(format!("select_row {i} of {m} rows")));
        }
        let data = a.data()[i * n..(i + 1) * n].to_vec();
        let track = a.requires_grad();
        let out = self.output(vec![1, n], data, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let mut da = vec![F::zero(); m * n];
                da[i * n..(i + 1) * n].copy_from_slice(&g);
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }

    /// Zero every row at index >= `valid_rows`.
    pub fn mask_rows(&self, a: &Tensor<F>, valid_rows: usize) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        if valid_rows == 0 || valid_rows > m {
            return Err(Error::Data(format!("mask_rows: {valid_rows} of {m} rows")));
        }
        let mut data = a.data().clone();
        for x in data[valid_rows * n..].iter_mut() {
            *x = F::zero();
        }
        let track = a.requires_grad();
        let out = self.output(vec![m, n], data, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let mut g = o.grad_snapshot();
                for x in g[valid_rows * n..].iter_mut() {
                    *x = F::zero();
                }
                a.add_to_grad(&g);
            });
        }
        Ok(out)
    }

    /// Rows of `table` selected by `ids`, as a `len(ids)×dim` tensor. The
    /// backward pass scatters into the selected rows only; rows listed in
    /// `frozen_rows` (the padding row) receive no gradient.
    pub fn embedding(
        &self,
        table: &Tensor<F>,
        ids: &[usize],
        frozen_rows: &[usize],
    ) -> Result<Tensor<F>> {
        let (vocab, dim) = table.dims2();
        if ids.is_empty() {
            return Err(Error::Data("embedding of empty id sequence".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
            return Err(Error::Data(format!(
                "token id {bad} out of range (vocab {vocab})"
            )));
        }
        let td = table.data();
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            data.extend_from_slice(&td[id * dim..(id + 1) * dim]);
        }
        drop(td);
        let track = table.requires_grad();
        let out = self.output(vec![ids.len(), dim], data, track);
        if track {
            let (table, o) = (table.clone(), out.clone());
            let ids = ids.to_vec();
            let frozen = frozen_rows.to_vec();
            self.record(move || {
                let g = o.grad_snapshot();
                let mut dt = vec![F::zero(); vocab * dim];
                for (t, &id) in ids.iter().enumerate() {
                    if frozen.contains(&id) {
                        continue;
                    }
                    for j in 0..dim {
                        dt[id * dim + j] += g[t * dim + j];
                    }
                }
                table.add_to_grad(&dt);
            });
        }
        Ok(out)
    }

    // ── reductions / pooling ────────────────────────────────────────

    pub fn sum(&self, a: &Tensor<F>) -> Tensor<F> {
        let total: F = a.data().iter().copied().sum();
        let track = a.requires_grad();
        let out = self.output(vec![1, 1], vec![total], track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot()[0];
                a.add_to_grad(&vec![g; a.numel()]);
            });
        }
        out
    }

    /// Column-wise mean over the first `valid_rows` rows -> `1×n`.
    pub fn mean_pool_rows(&self, a: &Tensor<F>, valid_rows: usize) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        if valid_rows == 0 || valid_rows > m {
            return Err(Error::Data(format!("mean pool over {valid_rows} of {m} rows")));
        }
        let inv = F::one() / F::of(valid_rows as f64);
        let ad = a.data();
        let mut out = vec![F::zero(); n];
        for i in 0..valid_rows {
            for j in 0..n {
                out[j] += ad[i * n + j] * inv;
            }
        }
        drop(ad);
        let track = a.requires_grad();
        let out = self.output(vec![1, n], out, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let mut da = vec![F::zero(); m * n];
                for i in 0..valid_rows {
                    for j in 0..n {
                        da[i * n + j] = g[j] * inv;
                    }
                }
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }

    /// Column-wise max over the first `valid_rows` rows -> `1×n`. Gradient
    /// routes to the first maximal row of each column.
    pub fn max_pool_rows(&self, a: &Tensor<F>, valid_rows: usize) -> Result<Tensor<F>> {
        let (m, n) = a.dims2();
        if valid_rows == 0 || valid_rows > m {
            return Err(Error::Data(format!("max pool over {valid_rows} of {m} rows")));
        }
        let ad = a.data();
        let mut out = vec![F::neg_infinity(); n];
        let mut argmax = vec![0usize; n];
        for i in 0..valid_rows {
            for j in 0..n {
                if ad[i * n + j] > out[j] {
                    out[j] = ad[i * n + j];
                    argmax[j] = i;
                }
            }
        }
        drop(ad);
        let track = a.requires_grad();
        let out = self.output(vec![1, n], out, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let mut da = vec![F::zero(); m * n];
                for j in 0..n {
                    da[argmax[j] * n + j] = g[j];
                }
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }

    // ── regularization ──────────────────────────────────────────────

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`; in
    /// eval mode this is the identity.
    pub fn dropout<R: Rng>(
        &self,
        a: &Tensor<F>,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor<F>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a.clone());
        }
        let scale = F::of(1.0 / (1.0 - rate));
        let mask: Vec<F> = (0..a.numel())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    F::zero()
                } else {
                    scale
                }
            })
            .collect();
        let data: Vec<F> = a.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let track = a.requires_grad();
        let out = self.output(a.shape().to_vec(), data, track);
        if track {
            let (a, o) = (a.clone(), out.clone());
            self.record(move || {
                let g = o.grad_snapshot();
                let da: Vec<F> = g.iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                a.add_to_grad(&da);
            });
        }
        Ok(out)
    }
}
