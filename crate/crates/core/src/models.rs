//! Benchmark architectures and the shared autoregressive rollout driver.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::conv::ConvGeometry;
use crate::error::{config_err, shape_err, Result};
use crate::grid::GridCoords;
use crate::layers::{
    fourier_layer_on, frnn_cell_on, init_hidden, rnn_cell_on, Activation, FrnnCellVars, PointwiseVars, SpectralVars,
};
use crate::spectral::check_modes;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Sliding-window Fourier neural operator.
    #[serde(rename = "fno", alias = "fno2d")]
    Fno2d,
    /// Stacked Fourier-RNN cells.
    Frnn,
    /// Convolutional encoder, dense RNN core, transposed-convolution decoder.
    Crnn,
    /// F-RNN topology with pointwise-only cells (no spectral terms).
    Rnn,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Fno2d => "fno",
            Arch::Frnn => "frnn",
            Arch::Crnn => "crnn",
            Arch::Rnn => "rnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fno" | "fno2d" => Some(Arch::Fno2d),
            "frnn" => Some(Arch::Frnn),
            "crnn" => Some(Arch::Crnn),
            "rnn" => Some(Arch::Rnn),
            _ => None,
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, Arch::Fno2d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Channel width of Fourier layers / F-RNN hidden size.
    pub width: usize,
    pub modes: (usize, usize),
    /// Fourier layers (FNO), cells (F-RNN, RNN) or dense RNN layers (C-RNN).
    pub depth: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub step: usize,
    /// Activation on the output of the last layer or cell.
    pub activation: Activation,
    pub grid: GridCoords,
    /// Hidden width of the FNO projection head.
    pub projection: usize,
    pub crnn_hidden: usize,
    /// Encoder channel schedule; stride-2 convolutions continue with the last
    /// entry until the spatial size reaches `crnn_latent`.
    pub crnn_channels: Vec<usize>,
    pub crnn_latent: usize,
    pub crnn_kernel: usize,
    pub bias: bool,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Architecture sizes used for the published comparison.
    pub fn reference(arch: Arch, grid: GridCoords, t_in: usize, t_out: usize) -> Self {
        let (depth, activation) = match arch {
            Arch::Fno2d => (4, Activation::Identity),
            Arch::Frnn | Arch::Rnn => (2, Activation::Tanh),
            Arch::Crnn => (4, Activation::Tanh),
        };
        Self {
            arch,
            width: 32,
            modes: (16, 16),
            depth,
            t_in,
            t_out,
            step: 1,
            activation,
            grid,
            projection: 128,
            crnn_hidden: 256,
            crnn_channels: vec![16, 32, 64],
            crnn_latent: 4,
            crnn_kernel: 5,
            bias: true,
            init_seed: 0,
        }
    }

    pub fn with_size(mut self, width: usize, modes: usize) -> Self {
        self.width = width;
        self.modes = (modes, modes);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.step != 1 {
            return Err(config_err!("only step size 1 is supported, got {}", self.step));
        }
        if self.t_in == 0 || self.t_out == 0 {
            return Err(config_err!("T_in and T_out must be at least 1"));
        }
        if self.depth == 0 {
            return Err(config_err!("depth must be at least 1"));
        }
        match self.arch {
            Arch::Fno2d => {
                if self.width == 0 || self.projection == 0 {
                    return Err(config_err!("FNO widths must be positive"));
                }
                check_modes(self.grid.nx, self.grid.ny, self.modes.0, self.modes.1)?;
            }
            Arch::Frnn | Arch::Rnn => {
                if self.width < 3 {
                    return Err(config_err!("recurrent width {} < 3 cannot hold the hidden-state layout", self.width));
                }
                if self.arch == Arch::Frnn {
                    check_modes(self.grid.nx, self.grid.ny, self.modes.0, self.modes.1)?;
                }
            }
            Arch::Crnn => {
                if self.crnn_channels.is_empty() || self.crnn_hidden == 0 || self.crnn_latent == 0 {
                    return Err(config_err!("C-RNN sizes must be positive"));
                }
                let downs = self.crnn_downsamples()?;
                if downs == 0 {
                    return Err(config_err!("grid already at or below the C-RNN latent size"));
                }
            }
        }
        Ok(())
    }

    fn crnn_downsamples(&self) -> Result<usize> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut n = 0;
        let (mut h, mut w) = (nx, ny);
        while h > self.crnn_latent || w > self.crnn_latent {
            if h % 2 != 0 || w % 2 != 0 {
                return Err(config_err!(
                    "C-RNN needs a grid that halves down to {}, got {}x{}",
                    self.crnn_latent,
                    nx,
                    ny
                ));
            }
            h /= 2;
            w /= 2;
            n += 1;
        }
        if h != self.crnn_latent || w != self.crnn_latent {
            return Err(config_err!("C-RNN needs a grid that halves down to {}, got {}x{}", self.crnn_latent, nx, ny));
        }
        Ok(n)
    }

    fn crnn_channel(&self, i: usize) -> usize {
        *self.crnn_channels.get(i).unwrap_or_else(|| self.crnn_channels.last().unwrap())
    }
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: Option<ParamId>,
}

#[derive(Debug, Clone, Copy)]
struct Spectral {
    re: ParamId,
    im: ParamId,
}

#[derive(Debug, Clone)]
struct CellIds {
    rx: Option<Spectral>,
    rh: Option<Spectral>,
    wx: Dense,
    wh: Dense,
}

#[derive(Debug, Clone)]
enum Layout {
    Fno { lift: Dense, layers: Vec<(Spectral, Dense)>, proj1: Dense, proj2: Dense },
    Recurrent { lift: Dense, cells: Vec<CellIds>, proj: Dense },
    Crnn { enc: Vec<Dense>, enc_dense: Dense, cells: Vec<CellIds>, dec_dense: Dense, dec: Vec<Dense> },
}

/// A built architecture: configuration, parameters and the wiring between them.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    layout: Layout,
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        Tensor::from_fn(shape, |_| self.rng.random_range(-bound..=bound))
    }

    fn dense(&mut self, store: &mut ParamStore, name: &str, cin: usize, cout: usize, bias: bool) -> Dense {
        let bound = 1.0 / libm::sqrt(cin as f64);
        let w = store.add(&format!("{name}.w"), self.uniform(&[cin, cout], bound));
        let b = bias.then(|| store.add(&format!("{name}.b"), self.uniform(&[cout], bound)));
        Dense { w, b }
    }

    fn spectral(&mut self, store: &mut ParamStore, name: &str, cin: usize, cout: usize, m: (usize, usize)) -> Spectral {
        let scale = 1.0 / (cin * cout) as f64;
        let shape = [2, cin, cout, m.0, m.1];
        let re = Tensor::from_fn(&shape, |_| scale * self.rng.random::<f64>());
        let im = Tensor::from_fn(&shape, |_| scale * self.rng.random::<f64>());
        Spectral { re: store.add(&format!("{name}.re"), re), im: store.add(&format!("{name}.im"), im) }
    }

    fn conv(&mut self, store: &mut ParamStore, name: &str, k: usize, cin: usize, cout: usize, bias: bool) -> Dense {
        let bound = 1.0 / libm::sqrt((cin * k * k) as f64);
        let w = store.add(&format!("{name}.w"), self.uniform(&[k, k, cin, cout], bound));
        let b = bias.then(|| store.add(&format!("{name}.b"), self.uniform(&[cout], bound)));
        Dense { w, b }
    }
}

pub fn build_fno2d(cfg: &ModelConfig) -> Result<Model> {
    if cfg.arch != Arch::Fno2d {
        return Err(config_err!("build_fno2d called with {:?}", cfg.arch));
    }
    cfg.validate()?;
    let mut store = ParamStore::new();
    let mut init = Init { rng: ChaCha8Rng::seed_from_u64(cfg.init_seed) };
    let w = cfg.width;
    let lift = init.dense(&mut store, "lift", cfg.t_in + 2, w, cfg.bias);
    let layers = (0..cfg.depth)
        .map(|l| {
            let r = init.spectral(&mut store, &format!("layer{l}.r"), w, w, cfg.modes);
            let d = init.dense(&mut store, &format!("layer{l}.w"), w, w, cfg.bias);
            (r, d)
        })
        .collect();
    let proj1 = init.dense(&mut store, "proj1", w, cfg.projection, cfg.bias);
    let proj2 = init.dense(&mut store, "proj2", cfg.projection, 1, cfg.bias);
    Ok(Model { config: cfg.clone(), params: store, layout: Layout::Fno { lift, layers, proj1, proj2 } })
}

fn build_recurrent(cfg: &ModelConfig, spectral: bool) -> Result<Model> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    let mut init = Init { rng: ChaCha8Rng::seed_from_u64(cfg.init_seed) };
    let w = cfg.width;
    let lift = init.dense(&mut store, "lift", 3, w, cfg.bias);
    let cells = (0..cfg.depth)
        .map(|c| {
            let (rx, rh) = if spectral {
                (
                    Some(init.spectral(&mut store, &format!("cell{c}.rx"), w, w, cfg.modes)),
                    Some(init.spectral(&mut store, &format!("cell{c}.rh"), w, w, cfg.modes)),
                )
            } else {
                (None, None)
            };
            let wx = init.dense(&mut store, &format!("cell{c}.wx"), w, w, cfg.bias);
            let wh = init.dense(&mut store, &format!("cell{c}.wh"), w, w, cfg.bias);
            CellIds { rx, rh, wx, wh }
        })
        .collect();
    let proj = init.dense(&mut store, "proj", w, 1, cfg.bias);
    Ok(Model { config: cfg.clone(), params: store, layout: Layout::Recurrent { lift, cells, proj } })
}

pub fn build_frnn(cfg: &ModelConfig) -> Result<Model> {
    if cfg.arch != Arch::Frnn {
        return Err(config_err!("build_frnn called with {:?}", cfg.arch));
    }
    build_recurrent(cfg, true)
}

/// The F-RNN topology with pointwise-only cells.
pub fn build_rnn(cfg: &ModelConfig) -> Result<Model> {
    if cfg.arch != Arch::Rnn {
        return Err(config_err!("build_rnn called with {:?}", cfg.arch));
    }
    build_recurrent(cfg, false)
}

pub fn build_crnn(cfg: &ModelConfig) -> Result<Model> {
    if cfg.arch != Arch::Crnn {
        return Err(config_err!("build_crnn called with {:?}", cfg.arch));
    }
    cfg.validate()?;
    let downs = cfg.crnn_downsamples()?;
    let mut store = ParamStore::new();
    let mut init = Init { rng: ChaCha8Rng::seed_from_u64(cfg.init_seed) };
    let k = cfg.crnn_kernel;
    let mut enc = Vec::with_capacity(downs);
    let mut cin = 1;
    for i in 0..downs {
        let cout = cfg.crnn_channel(i);
        enc.push(init.conv(&mut store, &format!("enc{i}"), k, cin, cout, cfg.bias));
        cin = cout;
    }
    let latent = cfg.crnn_latent;
    let flat = latent * latent * cin;
    let hid = cfg.crnn_hidden;
    let enc_dense = init.dense(&mut store, "enc_dense", flat, hid, cfg.bias);
    let cells = (0..cfg.depth)
        .map(|c| CellIds {
            rx: None,
            rh: None,
            wx: init.dense(&mut store, &format!("rnn{c}.wx"), hid, hid, cfg.bias),
            wh: init.dense(&mut store, &format!("rnn{c}.wh"), hid, hid, cfg.bias),
        })
        .collect();
    let dec_dense = init.dense(&mut store, "dec_dense", hid, flat, cfg.bias);
    let mut dec = Vec::with_capacity(downs);
    for i in (0..downs).rev() {
        let cout = if i == 0 { 1 } else { cfg.crnn_channel(i - 1) };
        dec.push(init.conv(&mut store, &format!("dec{}", downs - 1 - i), k, cin, cout, cfg.bias));
        cin = cout;
    }
    Ok(Model { config: cfg.clone(), params: store, layout: Layout::Crnn { enc, enc_dense, cells, dec_dense, dec } })
}

impl Model {
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        match cfg.arch {
            Arch::Fno2d => build_fno2d(cfg),
            Arch::Frnn => build_frnn(cfg),
            Arch::Crnn => build_crnn(cfg),
            Arch::Rnn => build_rnn(cfg),
        }
    }

    /// Rebuilds the wiring for `cfg` and installs the given parameters, which
    /// must match the freshly built model by name and shape.
    pub fn from_parts(cfg: &ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Self::build(cfg)?;
        if params.len() != model.params.len() {
            return Err(shape_err!(
                "parameter count {} does not match architecture ({})",
                params.len(),
                model.params.len()
            ));
        }
        for ((_, have), (_, want)) in params.iter().zip(model.params.iter()) {
            if have.name != want.name || have.value.shape() != want.value.shape() {
                return Err(shape_err!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    have.name,
                    have.value.shape(),
                    want.name,
                    want.value.shape()
                ));
            }
        }
        model.params = params;
        Ok(model)
    }

    /// Ids of all spectral weight tensors.
    pub fn spectral_params(&self) -> Vec<ParamId> {
        let mut out = Vec::new();
        let mut push = |s: &Spectral| {
            out.push(s.re);
            out.push(s.im);
        };
        match &self.layout {
            Layout::Fno { layers, .. } => layers.iter().for_each(|(s, _)| push(s)),
            Layout::Recurrent { cells, .. } | Layout::Crnn { cells, .. } => {
                for c in cells {
                    c.rx.iter().chain(c.rh.iter()).for_each(&mut push);
                }
            }
        }
        out
    }

    /// Sets every spectral weight to zero and stops the optimizer from
    /// updating it, reducing an F-RNN to its pointwise RNN counterpart.
    pub fn zero_and_freeze_spectral(&mut self) {
        for id in self.spectral_params() {
            self.params.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
            self.params.set_trainable(id, false);
        }
    }
}

pub fn count_params(model: &Model) -> usize {
    model.params.num_scalars()
}

fn dense_on(tape: &mut Tape<'_>, d: Dense) -> PointwiseVars {
    PointwiseVars { w: tape.param(d.w), b: d.b.map(|b| tape.param(b)) }
}

fn spectral_on(tape: &mut Tape<'_>, s: Spectral) -> SpectralVars {
    SpectralVars { re: tape.param(s.re), im: tape.param(s.im) }
}

/// How a model consumes its input window during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutKind {
    /// The model maps the last `t_in` frames (as channels) to the next frame.
    Window,
    /// The model consumes one frame per step and carries a hidden state.
    Recurrent,
}

/// A next-frame predictor that can be rolled forward on a tape.
pub trait SequenceModel {
    type State;

    fn kind(&self) -> RolloutKind;

    fn t_in(&self) -> usize;

    /// Prepares per-rollout state from the `(batch, nx, ny, t_in)` input window.
    fn start(&self, tape: &mut Tape<'_>, window: Var) -> Result<Self::State>;

    /// Predicts the next `(batch, nx, ny, 1)` frame. `input` is the current
    /// window for [`RolloutKind::Window`] models and one frame otherwise.
    fn step(&self, tape: &mut Tape<'_>, state: &mut Self::State, input: Var) -> Result<Var>;
}

pub struct ModelState {
    coords: Option<Var>,
    hidden: Vec<Var>,
}

impl ModelState {
    /// Current hidden state of every recurrent cell; empty for window models.
    pub fn hidden(&self) -> &[Var] {
        &self.hidden
    }
}

impl SequenceModel for Model {
    type State = ModelState;

    fn kind(&self) -> RolloutKind {
        if self.config.arch.is_recurrent() {
            RolloutKind::Recurrent
        } else {
            RolloutKind::Window
        }
    }

    fn t_in(&self) -> usize {
        self.config.t_in
    }

    fn start(&self, tape: &mut Tape<'_>, window: Var) -> Result<ModelState> {
        let batch = tape.shape(window)[0];
        let grid = &self.config.grid;
        match &self.layout {
            Layout::Fno { .. } => {
                Ok(ModelState { coords: Some(tape.leaf(grid.coordinate_channels(batch))), hidden: Vec::new() })
            }
            Layout::Recurrent { cells, .. } => {
                let h0 = init_hidden(tape.value(window), self.config.width, grid)?;
                let h0 = tape.leaf(h0.0);
                Ok(ModelState {
                    coords: Some(tape.leaf(grid.coordinate_channels(batch))),
                    hidden: vec![h0; cells.len()],
                })
            }
            Layout::Crnn { cells, .. } => {
                let h0 = tape.leaf(Tensor::zeros(&[batch, self.config.crnn_hidden]));
                Ok(ModelState { coords: None, hidden: vec![h0; cells.len()] })
            }
        }
    }

    fn step(&self, tape: &mut Tape<'_>, state: &mut ModelState, input: Var) -> Result<Var> {
        let cfg = &self.config;
        let n_cells = state.hidden.len();
        let act_for = |i: usize, n: usize| if i + 1 == n { cfg.activation } else { Activation::Relu };
        match &self.layout {
            Layout::Fno { lift, layers, proj1, proj2 } => {
                let coords = state.coords.expect("fno state");
                let x = tape.concat(&[input, coords])?;
                let lv = dense_on(tape, *lift);
                let mut v = tape.linear(x, lv.w, lv.b)?;
                for (i, (s, d)) in layers.iter().enumerate() {
                    let (sv, dv) = (spectral_on(tape, *s), dense_on(tape, *d));
                    v = fourier_layer_on(tape, v, sv, dv, act_for(i, layers.len()))?;
                }
                let p1 = dense_on(tape, *proj1);
                let v = tape.linear(v, p1.w, p1.b)?;
                let v = tape.relu(v);
                let p2 = dense_on(tape, *proj2);
                tape.linear(v, p2.w, p2.b)
            }
            Layout::Recurrent { lift, cells, proj } => {
                let coords = state.coords.expect("recurrent state");
                let x = tape.concat(&[input, coords])?;
                let lv = dense_on(tape, *lift);
                let mut v = tape.linear(x, lv.w, lv.b)?;
                for (i, c) in cells.iter().enumerate() {
                    let (wx, wh) = (dense_on(tape, c.wx), dense_on(tape, c.wh));
                    let act = act_for(i, n_cells);
                    let (h, y) = match (c.rx, c.rh) {
                        (Some(rx), Some(rh)) => {
                            let cell = FrnnCellVars { rx: spectral_on(tape, rx), rh: spectral_on(tape, rh), wx, wh };
                            frnn_cell_on(tape, v, state.hidden[i], cell, act)?
                        }
                        _ => rnn_cell_on(tape, v, state.hidden[i], wx, wh, act)?,
                    };
                    state.hidden[i] = h;
                    v = y;
                }
                let p = dense_on(tape, *proj);
                tape.linear(v, p.w, p.b)
            }
            Layout::Crnn { enc, enc_dense, cells, dec_dense, dec } => {
                let batch = tape.shape(input)[0];
                let geom = ConvGeometry { kernel: cfg.crnn_kernel, stride: 2, pad: cfg.crnn_kernel / 2, output_pad: 1 };
                let mut v = input;
                for e in enc {
                    let ev = dense_on(tape, *e);
                    v = tape.conv2d(v, ev.w, ev.b, geom)?;
                    v = tape.relu(v);
                }
                let latent_shape = tape.shape(v).to_vec();
                let flat: usize = latent_shape[1..].iter().product();
                v = tape.reshape(v, &[batch, flat])?;
                let ed = dense_on(tape, *enc_dense);
                v = tape.linear(v, ed.w, ed.b)?;
                v = tape.relu(v);
                for (i, c) in cells.iter().enumerate() {
                    let (wx, wh) = (dense_on(tape, c.wx), dense_on(tape, c.wh));
                    let (h, y) = rnn_cell_on(tape, v, state.hidden[i], wx, wh, act_for(i, n_cells))?;
                    state.hidden[i] = h;
                    v = y;
                }
                let dd = dense_on(tape, *dec_dense);
                v = tape.linear(v, dd.w, dd.b)?;
                v = tape.relu(v);
                v = tape.reshape(v, &latent_shape)?;
                for (i, d) in dec.iter().enumerate() {
                    let dv = dense_on(tape, *d);
                    v = tape.conv_transpose2d(v, dv.w, dv.b, geom)?;
                    if i + 1 < dec.len() {
                        v = tape.relu(v);
                    }
                }
                Ok(v)
            }
        }
    }
}

/// Rolls a model forward `t_out` frames from a `(batch, nx, ny, t_in)` window.
///
/// Window models slide: predict, drop the oldest frame, append the prediction.
/// Recurrent models consume the window one frame at a time; the output after
/// the last window frame is the first prediction, and every prediction is fed
/// back as the next input. With `teacher` (`(batch, nx, ny, t_out)` targets)
/// the true frames replace the fed-back predictions.
pub fn rollout_on<M: SequenceModel>(
    model: &M,
    tape: &mut Tape<'_>,
    window: Var,
    t_out: usize,
    teacher: Option<Var>,
) -> Result<Vec<Var>> {
    let t_in = model.t_in();
    let shape = tape.shape(window).to_vec();
    if shape.len() != 4 || shape[3] != t_in {
        return Err(shape_err!("rollout expects a window with {t_in} frames, got shape {:?}", shape));
    }
    let feed = |tape: &mut Tape<'_>, k: usize, pred: Var| -> Result<Var> {
        match teacher {
            Some(t) => tape.narrow(t, k, 1),
            None => Ok(pred),
        }
    };
    let mut state = model.start(tape, window)?;
    let mut out = Vec::with_capacity(t_out);
    match model.kind() {
        RolloutKind::Window => {
            let mut win = window;
            for k in 0..t_out {
                let pred = model.step(tape, &mut state, win)?;
                out.push(pred);
                if k + 1 < t_out {
                    let next = feed(tape, k, pred)?;
                    win = if t_in == 1 {
                        next
                    } else {
                        let keep = tape.narrow(win, 1, t_in - 1)?;
                        tape.concat(&[keep, next])?
                    };
                }
            }
        }
        RolloutKind::Recurrent => {
            let mut pred = None;
            for t in 0..t_in {
                let frame = tape.narrow(window, t, 1)?;
                pred = Some(model.step(tape, &mut state, frame)?);
            }
            let mut pred = pred.expect("t_in >= 1");
            out.push(pred);
            for k in 1..t_out {
                let next = feed(tape, k - 1, pred)?;
                pred = model.step(tape, &mut state, next)?;
                out.push(pred);
            }
        }
    }
    Ok(out)
}

/// Value-level rollout, `(batch, nx, ny, t_in)` → `(batch, nx, ny, t_out)`.
pub fn rollout(model: &Model, window: &Tensor, t_out: usize) -> Result<Tensor> {
    let mut tape = Tape::with_params(&model.params);
    rollout_tensor(model, &mut tape, window, t_out)
}

/// Like [`rollout`] for any [`SequenceModel`] on a caller-supplied tape.
pub fn rollout_tensor<M: SequenceModel>(
    model: &M,
    tape: &mut Tape<'_>,
    window: &Tensor,
    t_out: usize,
) -> Result<Tensor> {
    let w = tape.leaf(window.clone());
    let frames = rollout_on(model, tape, w, t_out, None)?;
    let vals: Vec<&Tensor> = frames.iter().map(|&f| tape.value(f)).collect();
    Tensor::concat_last(&vals)
}

/// Human-readable parameter summary, one line per tensor.
pub fn describe(model: &Model) -> String {
    let mut s = String::new();
    for (_, p) in model.params.iter() {
        s.push_str(&format!("{:<20} {:?}\n", p.name, p.value.shape()));
    }
    s.push_str(&format!("total {}\n", count_params(model)));
    s
}
