//! Fourier layer, RNN cell and F-RNN cell primitives.
//!
//! Each primitive exists twice: a tape-level form used by the models (taking
//! [`Var`] handles so gradients flow through it) and a value-level form on plain
//! tensors. The value-level form records a throwaway tape.
//!
//! Both recurrent cells feed the *pre-activation* state forward:
//! `h_t = A x_t + B h_{t-1}`, `y_t = act(h_t)`. A textbook Elman cell would
//! carry `act(h_t)` instead.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{config_err, shape_err, Result};
use crate::grid::GridCoords;
use crate::tensor::{FieldTensor, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply_on(self, tape: &mut Tape<'_>, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// Complex per-mode channel-mixing weights for the two low-frequency row blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    /// `(2, in, out, m1, m2)` real parts.
    pub re: Tensor,
    /// `(2, in, out, m1, m2)` imaginary parts.
    pub im: Tensor,
}

impl SpectralWeights {
    pub fn zeros(cin: usize, cout: usize, m1: usize, m2: usize) -> Self {
        let shape = [2, cin, cout, m1, m2];
        Self { re: Tensor::zeros(&shape), im: Tensor::zeros(&shape) }
    }

    /// Identity channel map on every retained mode.
    pub fn identity(channels: usize, m1: usize, m2: usize) -> Self {
        let mut w = Self::zeros(channels, channels, m1, m2);
        for blk in 0..2 {
            for c in 0..channels {
                let base = ((blk * channels + c) * channels + c) * m1 * m2;
                w.re.data_mut()[base..base + m1 * m2].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        w
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.re.shape()[3], self.re.shape()[4])
    }

    pub fn channels(&self) -> (usize, usize) {
        (self.re.shape()[1], self.re.shape()[2])
    }
}

/// Per-grid-point affine channel map.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseWeights {
    /// `(in, out)`.
    pub w: Tensor,
    /// `(out)`.
    pub b: Option<Tensor>,
}

impl PointwiseWeights {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Self { w: Tensor::zeros(&[cin, cout]), b: Some(Tensor::zeros(&[cout])) }
    }

    pub fn identity(channels: usize) -> Self {
        let w = Tensor::from_fn(&[channels, channels], |k| if k / channels == k % channels { 1.0 } else { 0.0 });
        Self { w, b: Some(Tensor::zeros(&[channels])) }
    }
}

/// Recurrent memory `h_t`, `(batch, nx, ny, hidden)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub FieldTensor);

/// Tape handles of a [`SpectralWeights`].
#[derive(Debug, Clone, Copy)]
pub struct SpectralVars {
    pub re: Var,
    pub im: Var,
}

/// Tape handles of a [`PointwiseWeights`].
#[derive(Debug, Clone, Copy)]
pub struct PointwiseVars {
    pub w: Var,
    pub b: Option<Var>,
}

impl SpectralWeights {
    pub fn on(&self, tape: &mut Tape<'_>) -> SpectralVars {
        SpectralVars { re: tape.leaf(self.re.clone()), im: tape.leaf(self.im.clone()) }
    }
}

impl PointwiseWeights {
    pub fn on(&self, tape: &mut Tape<'_>) -> PointwiseVars {
        PointwiseVars { w: tape.leaf(self.w.clone()), b: self.b.as_ref().map(|b| tape.leaf(b.clone())) }
    }
}

pub fn spectral_conv_on(tape: &mut Tape<'_>, x: Var, r: SpectralVars) -> Result<Var> {
    tape.spectral_conv(x, r.re, r.im)
}

pub fn pointwise_on(tape: &mut Tape<'_>, x: Var, w: PointwiseVars) -> Result<Var> {
    tape.linear(x, w.w, w.b)
}

/// `act(F^-1(R F(x)) + W x + b)`.
pub fn fourier_layer_on(
    tape: &mut Tape<'_>,
    x: Var,
    r: SpectralVars,
    w: PointwiseVars,
    act: Activation,
) -> Result<Var> {
    let s = spectral_conv_on(tape, x, r)?;
    let p = pointwise_on(tape, x, w)?;
    let sum = tape.add(s, p)?;
    Ok(act.apply_on(tape, sum))
}

/// `h_t = Wx x_t + Wh h_{t-1}`, returns `(h_t, act(h_t))`.
pub fn rnn_cell_on(
    tape: &mut Tape<'_>,
    x: Var,
    h_prev: Var,
    wx: PointwiseVars,
    wh: PointwiseVars,
    act: Activation,
) -> Result<(Var, Var)> {
    let a = pointwise_on(tape, x, wx)?;
    let b = pointwise_on(tape, h_prev, wh)?;
    let h = tape.add(a, b)?;
    Ok((h, act.apply_on(tape, h)))
}

/// Spectral and pointwise weights of one F-RNN cell.
#[derive(Debug, Clone, Copy)]
pub struct FrnnCellVars {
    pub rx: SpectralVars,
    pub rh: SpectralVars,
    pub wx: PointwiseVars,
    pub wh: PointwiseVars,
}

/// `h_t = F^-1(Rx F(x_t)) + Wx x_t + F^-1(Rh F(h_{t-1})) + Wh h_{t-1}`,
/// returns `(h_t, act(h_t))`.
pub fn frnn_cell_on(
    tape: &mut Tape<'_>,
    x: Var,
    h_prev: Var,
    cell: FrnnCellVars,
    act: Activation,
) -> Result<(Var, Var)> {
    if tape.shape(x)[..3] != tape.shape(h_prev)[..3] {
        return Err(shape_err!(
            "input {:?} and hidden state {:?} disagree on batch/grid",
            tape.shape(x),
            tape.shape(h_prev)
        ));
    }
    let sx = spectral_conv_on(tape, x, cell.rx)?;
    let px = pointwise_on(tape, x, cell.wx)?;
    let sh = spectral_conv_on(tape, h_prev, cell.rh)?;
    let ph = pointwise_on(tape, h_prev, cell.wh)?;
    let a = tape.add(sx, px)?;
    let b = tape.add(sh, ph)?;
    let h = tape.add(a, b)?;
    Ok((h, act.apply_on(tape, h)))
}

pub fn spectral_conv(x: &FieldTensor, r: &SpectralWeights) -> Result<FieldTensor> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let rv = r.on(&mut tape);
    let y = spectral_conv_on(&mut tape, xv, rv)?;
    Ok(tape.value(y).clone())
}

pub fn pointwise_linear(x: &FieldTensor, w: &PointwiseWeights) -> Result<FieldTensor> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let wv = w.on(&mut tape);
    let y = pointwise_on(&mut tape, xv, wv)?;
    Ok(tape.value(y).clone())
}

pub fn fourier_layer(
    x: &FieldTensor,
    r: &SpectralWeights,
    w: &PointwiseWeights,
    act: Activation,
) -> Result<FieldTensor> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let (rv, wv) = (r.on(&mut tape), w.on(&mut tape));
    let y = fourier_layer_on(&mut tape, xv, rv, wv, act)?;
    Ok(tape.value(y).clone())
}

pub fn rnn_cell_step(
    x: &FieldTensor,
    h_prev: &HiddenState,
    wx: &PointwiseWeights,
    wh: &PointwiseWeights,
    act: Activation,
) -> Result<(HiddenState, FieldTensor)> {
    if wh.w.shape()[0] != h_prev.0.last_dim() {
        return Err(shape_err!("hidden state has {} channels, Wh expects {}", h_prev.0.last_dim(), wh.w.shape()[0]));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let hv = tape.leaf(h_prev.0.clone());
    let (wxv, whv) = (wx.on(&mut tape), wh.on(&mut tape));
    let (h, y) = rnn_cell_on(&mut tape, xv, hv, wxv, whv, act)?;
    Ok((HiddenState(tape.value(h).clone()), tape.value(y).clone()))
}

#[allow(clippy::too_many_arguments)]
pub fn frnn_cell_step(
    x: &FieldTensor,
    h_prev: &HiddenState,
    rx: &SpectralWeights,
    rh: &SpectralWeights,
    wx: &PointwiseWeights,
    wh: &PointwiseWeights,
    act: Activation,
) -> Result<(HiddenState, FieldTensor)> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let hv = tape.leaf(h_prev.0.clone());
    let cell = FrnnCellVars { rx: rx.on(&mut tape), rh: rh.on(&mut tape), wx: wx.on(&mut tape), wh: wh.on(&mut tape) };
    let (h, y) = frnn_cell_on(&mut tape, xv, hv, cell, act)?;
    Ok((HiddenState(tape.value(h).clone()), tape.value(y).clone()))
}

/// Initial hidden state: the first frame of the window tiled over the leading
/// `hidden - 2` channels, then the x and y coordinate channels.
pub fn init_hidden(u_window: &FieldTensor, hidden_channels: usize, grid: &GridCoords) -> Result<HiddenState> {
    if hidden_channels < 3 {
        return Err(config_err!(
            "hidden size {hidden_channels} leaves no room for a field copy and two coordinate channels"
        ));
    }
    let [batch, nx, ny, frames] = match *u_window.shape() {
        [b, nx, ny, t] => [b, nx, ny, t],
        ref s => return Err(shape_err!("window must be (batch, nx, ny, frames), got {:?}", s)),
    };
    if frames == 0 || nx != grid.nx || ny != grid.ny {
        return Err(shape_err!("window {:?} does not match a {}x{} grid", u_window.shape(), grid.nx, grid.ny));
    }
    let coords = grid.coordinate_channels(batch);
    let copies = hidden_channels - 2;
    let mut data = Vec::with_capacity(batch * nx * ny * hidden_channels);
    for p in 0..batch * nx * ny {
        let v = u_window.data()[p * frames];
        data.extend(core::iter::repeat_n(v, copies));
        data.extend_from_slice(&coords.data()[2 * p..2 * p + 2]);
    }
    Ok(HiddenState(Tensor::new(&[batch, nx, ny, hidden_channels], data)?))
}
