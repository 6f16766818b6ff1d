//! Reverse-mode differentiation over a dynamically recorded tape.
//!
//! Every op records its inputs and whatever it needs for the adjoint. Parameters
//! live in a [`ParamStore`]; a tape borrows the store and refers to parameter
//! values instead of copying them, so each parameter appears as at most one node.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::conv::{self, ConvGeometry};
use crate::error::{shape_err, Error, Result};
use crate::fft::{self, hermitian_weight, Spectrum};
use crate::spectral::{self, SavedModes};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters keep their value through optimizer steps.
    pub trainable: bool,
}

/// Named trainable tensors with paired gradient buffers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param { name: name.to_string(), value, grad, trainable: true });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of real scalars across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Adds a backward pass's parameter gradients into the gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(&grads.params) {
            if let Some(g) = g {
                p.grad.add_assign(g);
            }
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var(usize);

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Tanh(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Spectral { x: Var, re: Var, im: Var, saved: SavedModes },
    Rfft2 { x: Var },
    Irfft2 { s: Var, ny: usize },
    Concat(Vec<Var>),
    Narrow { x: Var, start: usize },
    Reshape(Var),
    Conv { x: Var, w: Var, b: Option<Var>, geom: ConvGeometry, transpose: bool },
    Mse(Var, Var),
    Sum(Var),
}

struct Node {
    value: Value,
    op: Op,
}

/// Records a forward computation for reverse-mode differentiation.
pub struct Tape<'p> {
    nodes: Vec<Node>,
    store: Option<&'p ParamStore>,
    param_vars: BTreeMap<ParamId, Var>,
}

impl Default for Tape<'static> {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape<'static> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), store: None, param_vars: BTreeMap::new() }
    }
}

impl<'p> Tape<'p> {
    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape { nodes: Vec::new(), store: Some(store), param_vars: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.store.expect("parameter node without store").value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// A constant or input tensor whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        assert!(self.store.is_some(), "tape has no parameter store");
        self.nodes.push(Node { value: Value::Param(id), op: Op::Param(id) });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let y = self.value(a).map(|x| x * c);
        self.push(y, Op::Scale(a, c))
    }

    /// Adds a constant to every entry.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let y = self.value(a).map(|x| x + c);
        self.push(y, Op::Offset(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(y, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).map(libm::tanh);
        self.push(y, Op::Tanh(a))
    }

    /// Affine map over the last axis: `x (..., in) @ w (in, out) + b (out)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = linear_forward(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    /// Truncated-mode spectral convolution, see [`crate::layers::spectral_conv`].
    pub fn spectral_conv(&mut self, x: Var, re: Var, im: Var) -> Result<Var> {
        let (y, saved) = spectral::forward(self.value(x), self.value(re), self.value(im))?;
        Ok(self.push(y, Op::Spectral { x, re, im, saved }))
    }

    /// Real 2-D FFT; the result is `(batch, nx, ny/2+1, channels, 2)` with `[re, im]` last.
    pub fn rfft2(&mut self, x: Var) -> Result<Var> {
        let s = fft::rfft2(self.value(x))?;
        Ok(self.push(spectrum_to_tensor(&s), Op::Rfft2 { x }))
    }

    /// Inverse of [`Tape::rfft2`] onto a grid whose last spatial axis has length `ny`.
    pub fn irfft2(&mut self, s: Var, ny: usize) -> Result<Var> {
        let spec = tensor_to_spectrum(self.value(s), ny)?;
        let nx = spec.shape()[1];
        let y = fft::irfft2(&spec, nx, ny)?;
        Ok(self.push(y, Op::Irfft2 { s, ny }))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = Tensor::concat_last(&vals)?;
        Ok(self.push(y, Op::Concat(parts.to_vec())))
    }

    /// `[start, start + len)` along the last axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = self.value(x).narrow_last(start, len)?;
        Ok(self.push(y, Op::Narrow { x, start }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshape(shape)?;
        Ok(self.push(y, Op::Reshape(x)))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let y = conv::conv2d_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom)?;
        Ok(self.push(y, Op::Conv { x, w, b, geom, transpose: false }))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let y = conv::conv_transpose2d_forward(self.value(x), self.value(w), b.map(|b| self.value(b)), &geom)?;
        Ok(self.push(y, Op::Conv { x, w, b, geom, transpose: true }))
    }

    /// Mean squared difference, a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err!("mse shape mismatch {:?} vs {:?}", va.shape(), vb.shape()));
        }
        let n = va.len().max(1) as f64;
        let s: f64 = va.data().iter().zip(vb.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Propagates `d loss / d node` back through the tape. `loss` must be a
    /// one-element node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::State("backward called before any forward pass was recorded".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::State(alloc::format!("backward needs a scalar loss, got shape {:?}", self.shape(loss))));
        }
        let n_params = self.store.map_or(0, |s| s.len());
        let mut out = Gradients { params: vec![None; n_params], leaves: BTreeMap::new() };
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    out.leaves.insert(i, g);
                }
                Op::Param(id) => match &mut out.params[id.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                },
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |g, y| g * y)?;
                    let gb = g.zip_map(self.value(*a), |g, x| g * x)?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|v| v * c));
                }
                Op::Offset(a) => accumulate(&mut grads, *a, g),
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 })?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = self.value(Var(i));
                    let ga = g.zip_map(y, |g, y| g * (1.0 - y * y))?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::Linear { x, w, b } => {
                    let (gx, gw, gb) = linear_backward(&g, self.value(*x), self.value(*w));
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, gb);
                    }
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Spectral { x, re, im, saved } => {
                    let (gx, gre, gim) = spectral::backward(&g, saved, self.value(*re), self.value(*im));
                    accumulate(&mut grads, *im, gim);
                    accumulate(&mut grads, *re, gre);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Rfft2 { x } => {
                    let [_, nx, ny, _] = fft::field_dims(self.value(*x))?;
                    let mut spec = tensor_to_spectrum(&g, ny)?;
                    let [b, kx, ky, c] = spec.shape();
                    let n = (nx * ny) as f64;
                    for bi in 0..b {
                        for i in 0..kx {
                            for j in 0..ky {
                                let s = n / hermitian_weight(j, ny);
                                for ci in 0..c {
                                    let v = spec.get(bi, i, j, ci) * s;
                                    spec.set(bi, i, j, ci, v);
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, fft::irfft2(&spec, nx, ny)?);
                }
                Op::Irfft2 { s, ny } => {
                    let ny = *ny;
                    let mut spec = fft::rfft2(&g)?;
                    let [b, kx, ky, c] = spec.shape();
                    let n = (kx * ny) as f64;
                    for bi in 0..b {
                        for i in 0..kx {
                            for j in 0..ky {
                                let s = hermitian_weight(j, ny) / n;
                                for ci in 0..c {
                                    let v = spec.get(bi, i, j, ci) * s;
                                    spec.set(bi, i, j, ci, v);
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *s, spectrum_to_tensor(&spec));
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).last_dim();
                        accumulate(&mut grads, *p, g.narrow_last(start, w)?);
                        start += w;
                    }
                }
                Op::Narrow { x, start } => {
                    let xs = self.value(*x);
                    let (c, len) = (xs.last_dim(), g.last_dim());
                    let mut gx = Tensor::zeros(xs.shape());
                    for (row, grow) in gx.data_mut().chunks_mut(c).zip(g.data().chunks(len)) {
                        row[*start..*start + len].copy_from_slice(grow);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Reshape(x) => {
                    let shape = self.shape(*x).to_vec();
                    accumulate(&mut grads, *x, g.reshape(&shape)?);
                }
                Op::Conv { x, w, b, geom, transpose } => {
                    let (gx, gw, gb) = if *transpose {
                        conv::conv_transpose2d_backward(&g, self.value(*x), self.value(*w), geom)
                    } else {
                        conv::conv2d_backward(&g, self.value(*x), self.value(*w), geom)
                    };
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, gb);
                    }
                    accumulate(&mut grads, *w, gw);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Mse(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let c = 2.0 * g.item() / va.len().max(1) as f64;
                    let ga = va.zip_map(vb, |x, y| c * (x - y))?;
                    accumulate(&mut grads, *b, ga.map(|v| -v));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    accumulate(&mut grads, *a, Tensor::full(self.shape(*a), gv));
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    params: Vec<Option<Tensor>>,
    leaves: BTreeMap<usize, Tensor>,
}

impl Gradients {
    /// Gradient with respect to a leaf, `None` if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(&v.0)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.0).and_then(|g| g.as_ref())
    }
}

fn linear_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let (ci, co) = match *w.shape() {
        [ci, co] => (ci, co),
        ref s => return Err(shape_err!("linear weight must be (in, out), got {:?}", s)),
    };
    if x.last_dim() != ci || x.rank() == 0 {
        return Err(shape_err!("linear expects last axis {}, got shape {:?}", ci, x.shape()));
    }
    if let Some(b) = b {
        if b.shape() != [co] {
            return Err(shape_err!("linear bias must be ({co}), got {:?}", b.shape()));
        }
    }
    let rows = x.len() / ci;
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = co;
    let mut y = Tensor::zeros(&shape);
    let (xd, wd) = (x.data(), w.data());
    for (r, out) in y.data_mut().chunks_mut(co).enumerate() {
        if let Some(b) = b {
            out.copy_from_slice(b.data());
        }
        let xr = &xd[r * ci..(r + 1) * ci];
        for (i, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (o, wv) in out.iter_mut().zip(&wd[i * co..(i + 1) * co]) {
                *o += xv * wv;
            }
        }
    }
    debug_assert_eq!(rows * co, y.len());
    Ok(y)
}

fn linear_backward(g: &Tensor, x: &Tensor, w: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (ci, co) = (w.shape()[0], w.shape()[1]);
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[co]);
    let (xd, wd) = (x.data(), w.data());
    let gwd = gw.data_mut();
    for (r, (grow, gxr)) in g.data().chunks(co).zip(gx.data_mut().chunks_mut(ci)).enumerate() {
        for (b, gv) in gb.data_mut().iter_mut().zip(grow) {
            *b += gv;
        }
        let xr = &xd[r * ci..(r + 1) * ci];
        for i in 0..ci {
            let wrow = &wd[i * co..(i + 1) * co];
            let mut acc = 0.0;
            for (gv, wv) in grow.iter().zip(wrow) {
                acc += gv * wv;
            }
            gxr[i] = acc;
            let xv = xr[i];
            if xv != 0.0 {
                for (gw, gv) in gwd[i * co..(i + 1) * co].iter_mut().zip(grow) {
                    *gw += xv * gv;
                }
            }
        }
    }
    (gx, gw, gb)
}

pub(crate) fn spectrum_to_tensor(s: &Spectrum) -> Tensor {
    let [b, kx, ky, c] = s.shape();
    let data = s.data().iter().flat_map(|z| [z.re, z.im]).collect();
    Tensor::new(&[b, kx, ky, c, 2], data).expect("spectrum layout")
}

pub(crate) fn tensor_to_spectrum(t: &Tensor, ny: usize) -> Result<Spectrum> {
    let [b, kx, ky, c] = match *t.shape() {
        [b, kx, ky, c, 2] => [b, kx, ky, c],
        ref s => return Err(shape_err!("expected a (batch, kx, ky, channels, 2) spectrum, got {:?}", s)),
    };
    if ky != ny / 2 + 1 {
        return Err(shape_err!("spectrum has {} columns, a grid of width {} needs {}", ky, ny, ny / 2 + 1));
    }
    let mut s = Spectrum::zeros(b, kx, ny, c);
    for (z, pair) in s.data_mut().iter_mut().zip(t.data().chunks(2)) {
        *z = num_complex::Complex64::new(pair[0], pair[1]);
    }
    Ok(s)
}

/// Largest elementwise relative discrepancy between the tape gradient of a
/// scalar function and its central finite difference,
/// `max_i |analytic_i - fd_i| / (|fd_i| + 1e-12)`.
pub fn finite_diff_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<'static>, Var) -> Result<Var>,
{
    let eval = |p: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(p.clone());
        let y = f(&mut tape, x)?;
        Ok(tape.value(y).item())
    };
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let zero = Tensor::zeros(point.shape());
    let analytic = grads.wrt(x).unwrap_or(&zero);

    let mut worst: f64 = 0.0;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let fd = (up - down) / (2.0 * eps);
        let err = (analytic.data()[i] - fd).abs() / (fd.abs() + 1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
