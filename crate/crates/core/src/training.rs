//! Normalization, loss, Adam with step decay, and the epoch loop.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape};
use crate::data::{batch_iter, corrupt_dataset, derive_seed, BatchSource, NoiseSpec, TrajectoryDataset};
use crate::error::{config_err, shape_err, Error, Result};
use crate::models::{rollout_on, rollout_tensor, Model, SequenceModel};
use crate::tensor::Tensor;

const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Mean and standard deviation per grid point.
    PerPoint,
    /// One mean and standard deviation for the whole field.
    Scalar,
}

/// Gaussian normalization statistics fitted on training frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    /// `(nx, ny)` or `(1,)`.
    pub mean: Tensor,
    pub std: Tensor,
}

impl Normalizer {
    pub fn identity(nx: usize, ny: usize) -> Self {
        Self { mean: Tensor::zeros(&[nx, ny]), std: Tensor::full(&[nx, ny], 1.0) }
    }

    pub fn fit(train: &TrajectoryDataset, mode: NormMode) -> Result<Self> {
        let [sims, f, nx, ny] = train.dims();
        let count = sims * f;
        if count == 0 {
            return Err(config_err!("cannot fit a normalizer on an empty training split"));
        }
        let plane = nx * ny;
        let d = train.frames.data();
        match mode {
            NormMode::PerPoint => {
                let mut mean = Tensor::zeros(&[nx, ny]);
                for k in 0..count {
                    for (m, v) in mean.data_mut().iter_mut().zip(&d[k * plane..(k + 1) * plane]) {
                        *m += v;
                    }
                }
                mean.scale_inplace(1.0 / count as f64);
                let mut var = Tensor::zeros(&[nx, ny]);
                for k in 0..count {
                    let frame = &d[k * plane..(k + 1) * plane];
                    for ((s, v), m) in var.data_mut().iter_mut().zip(frame).zip(mean.data()) {
                        *s += (v - m) * (v - m);
                    }
                }
                let std = var.map(|s| libm::sqrt(s / count as f64).max(STD_FLOOR));
                Ok(Self { mean, std })
            }
            NormMode::Scalar => {
                let n = d.len() as f64;
                let m = d.iter().sum::<f64>() / n;
                let s = libm::sqrt(d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n);
                Ok(Self { mean: Tensor::scalar(m), std: Tensor::scalar(s.max(STD_FLOOR)) })
            }
        }
    }

    #[inline]
    fn stats(&self, point: usize) -> (f64, f64) {
        if self.mean.len() == 1 {
            (self.mean.data()[0], self.std.data()[0])
        } else {
            (self.mean.data()[point], self.std.data()[point])
        }
    }

    fn plane(&self) -> Option<usize> {
        (self.mean.len() > 1).then_some(self.mean.len())
    }

    fn check_plane(&self, nx: usize, ny: usize) -> Result<()> {
        match self.plane() {
            Some(p) if p != nx * ny => Err(shape_err!("normalizer fitted on {p} points, data has {nx}x{ny}")),
            _ => Ok(()),
        }
    }

    pub fn normalize_dataset(&self, ds: &TrajectoryDataset) -> Result<TrajectoryDataset> {
        let [_, _, nx, ny] = ds.dims();
        self.check_plane(nx, ny)?;
        let plane = nx * ny;
        let mut out = ds.clone();
        for (k, v) in out.frames.data_mut().iter_mut().enumerate() {
            let (m, s) = self.stats(k % plane);
            *v = (*v - m) / s;
        }
        Ok(out)
    }

    fn map_field(&self, x: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Result<Tensor> {
        let [_, nx, ny, c] = match *x.shape() {
            [b, nx, ny, c] => [b, nx, ny, c],
            ref s => return Err(shape_err!("expected a (batch, nx, ny, channels) field, got {:?}", s)),
        };
        self.check_plane(nx, ny)?;
        let plane = nx * ny;
        let mut out = x.clone();
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            let (m, s) = self.stats((k / c) % plane);
            *v = f(*v, m, s);
        }
        Ok(out)
    }

    /// Normalizes a `(batch, nx, ny, channels)` field.
    pub fn normalize_field(&self, x: &Tensor) -> Result<Tensor> {
        self.map_field(x, |v, m, s| (v - m) / s)
    }

    pub fn denormalize_field(&self, x: &Tensor) -> Result<Tensor> {
        self.map_field(x, |v, m, s| v * s + m)
    }
}

/// Mean of squared differences over all elements.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(shape_err!("mse shape mismatch {:?} vs {:?}", pred.shape(), target.shape()));
    }
    let n = pred.len().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Sum of per-step MSE over a full autoregressive rollout.
    Rollout,
    /// Same sum, but every step is fed the true previous frames.
    TeacherForced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub batch: usize,
    pub seed: u64,
    pub loss: LossMode,
    /// Noise factor applied to normalized training inputs and targets.
    pub train_noise: f64,
    /// Draw a fresh noise realization every epoch instead of one per dataset.
    pub resample_noise: bool,
    pub norm: NormMode,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Evaluate the test split every this many epochs (0 disables).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-3,
            decay: 0.9,
            decay_every: 100,
            batch: 50,
            seed: 0,
            loss: LossMode::Rollout,
            train_noise: 0.0,
            resample_noise: false,
            norm: NormMode::PerPoint,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.batch == 0 || self.batch > n_train {
            return Err(config_err!("batch {} must be in 1..={}", self.batch, n_train));
        }
        if !(self.lr >= 0.0) || !(self.decay > 0.0) || self.decay_every == 0 {
            return Err(config_err!("learning-rate schedule must be non-negative with positive decay"));
        }
        if !(self.train_noise >= 0.0) {
            return Err(config_err!("noise factor must be >= 0"));
        }
        Ok(())
    }
}

/// `lr0 * decay^floor(epoch / decay_every)`.
pub fn step_lr(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr * libm::pow(cfg.decay, (epoch / cfg.decay_every) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Self { m: zeros(), v: zeros(), t: 0, beta1, beta2, eps }
    }

    pub fn for_config(params: &ParamStore, cfg: &TrainConfig) -> Self {
        Self::new(params, cfg.beta1, cfg.beta2, cfg.eps)
    }
}

/// One bias-corrected Adam update using the gradients stored in `params`.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(shape_err!("Adam state tracks {} tensors, store has {}", state.m.len(), params.len()));
    }
    state.t += 1;
    let t = state.t as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - libm::pow(b1, t);
    let c2 = 1.0 - libm::pow(b2, t);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let i = id.index();
        let p = params.param_mut(id);
        if !p.trainable {
            continue;
        }
        if state.m[i].shape() != p.value.shape() {
            return Err(shape_err!("Adam moment shape mismatch for {}", p.name));
        }
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (k, (x, g)) in p.value.data_mut().iter_mut().zip(p.grad.data()).enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            *x -= lr * mh / (libm::sqrt(vh) + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Unnormalized MSE on the clean test split.
    pub test_mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

/// Where a (possibly resumed) run starts.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub next_epoch: usize,
    pub adam: AdamState,
}

impl TrainState {
    pub fn fresh(model: &Model, cfg: &TrainConfig) -> Self {
        Self { next_epoch: 0, adam: AdamState::for_config(&model.params, cfg) }
    }
}

/// Rollout loss and its gradient for one batch; gradients land in `model.params`.
pub fn batch_loss_and_grad(model: &mut Model, inputs: &Tensor, targets: &Tensor, loss_mode: LossMode) -> Result<f64> {
    let t_out = targets.shape()[3];
    let (loss, grads) = {
        let mut tape = Tape::with_params(&model.params);
        let x = tape.leaf(inputs.clone());
        let y = tape.leaf(targets.clone());
        let teacher = matches!(loss_mode, LossMode::TeacherForced).then_some(y);
        let preds = rollout_on(&*model, &mut tape, x, t_out, teacher)?;
        let mut total = None;
        for (k, p) in preds.into_iter().enumerate() {
            let target = tape.narrow(y, k, 1)?;
            let l = tape.mse(p, target)?;
            total = Some(match total {
                Some(t) => tape.add(t, l)?,
                None => l,
            });
        }
        let total = total.expect("t_out >= 1");
        let value = tape.value(total).item();
        if !value.is_finite() {
            return Ok(value);
        }
        (value, tape.backward(total)?)
    };
    model.params.zero_grad();
    model.params.accumulate(&grads);
    Ok(loss)
}

/// Trains `model` on the raw (unnormalized) training split.
///
/// `observer` sees every finished epoch together with the current model and
/// optimizer state.
pub fn train(
    model: &mut Model,
    train_raw: &TrajectoryDataset,
    test_raw: Option<&TrajectoryDataset>,
    normalizer: &Normalizer,
    cfg: &TrainConfig,
    state: &mut TrainState,
    mut observer: impl FnMut(&EpochRecord, &Model, &AdamState),
) -> Result<History> {
    cfg.validate(train_raw.n_sims())?;
    let (t_in, t_out) = (model.config.t_in, model.config.t_out);
    let clean = normalizer.normalize_dataset(train_raw)?;
    let mut noisy = None;
    let mut history = History::default();
    let first = state.next_epoch;
    for epoch in first..first + cfg.epochs {
        if cfg.train_noise > 0.0 && (noisy.is_none() || cfg.resample_noise) {
            let tag = if cfg.resample_noise { epoch as u64 } else { 0 };
            noisy = Some(corrupt_dataset(&clean, cfg.train_noise, derive_seed(cfg.seed, 0x7a1, 0), tag)?);
        }
        let src = BatchSource { clean: &clean, noisy: noisy.as_ref(), corrupt_targets: true, t_in, t_out };
        let lr = step_lr(epoch, cfg);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (bi, batch) in batch_iter(src, cfg.batch, cfg.seed, epoch as u64)?.enumerate() {
            let batch = batch?;
            let loss = batch_loss_and_grad(model, &batch.inputs, &batch.targets, cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi, lr });
            }
            adam_step(&mut model.params, &mut state.adam, lr)?;
            sum += loss * batch.sims.len() as f64;
            count += batch.sims.len();
        }
        let test_mse = match test_raw {
            Some(test) if cfg.eval_every > 0 && (epoch + 1 - first).is_multiple_of(cfg.eval_every) => {
                Some(evaluate_with(&*model, &model.params, test, normalizer, None, cfg.batch, t_out)?)
            }
            _ => None,
        };
        let record = EpochRecord { epoch, lr, train_loss: sum / count as f64, test_mse };
        state.next_epoch = epoch + 1;
        observer(&record, model, &state.adam);
        history.records.push(record);
    }
    Ok(history)
}

/// Unnormalized MSE of `t_out`-frame rollouts on a raw test split.
///
/// Inputs are normalized and, with `noise`, corrupted; predictions are
/// denormalized and compared against the clean raw targets.
pub fn evaluate<M: SequenceModel>(
    model: &M,
    params: &ParamStore,
    test_raw: &TrajectoryDataset,
    normalizer: &Normalizer,
    noise: Option<NoiseSpec>,
    batch: usize,
) -> Result<f64> {
    let t_in = model.t_in();
    let t_out = test_raw.meta.t_out.min(test_raw.n_frames().saturating_sub(t_in));
    evaluate_with(model, params, test_raw, normalizer, noise, batch, t_out)
}

pub fn evaluate_with<M: SequenceModel>(
    model: &M,
    params: &ParamStore,
    test_raw: &TrajectoryDataset,
    normalizer: &Normalizer,
    noise: Option<NoiseSpec>,
    batch: usize,
    t_out: usize,
) -> Result<f64> {
    let t_in = model.t_in();
    if t_out == 0 || t_in + t_out > test_raw.n_frames() {
        return Err(shape_err!("test split has {} frames, need {}+{}", test_raw.n_frames(), t_in, t_out));
    }
    let inputs_ds = match noise {
        Some(spec) if spec.variance > 0.0 => {
            let normed = normalizer.normalize_dataset(test_raw)?;
            corrupt_dataset(&normed, spec.variance, spec.seed, 0)?
        }
        _ => normalizer.normalize_dataset(test_raw)?,
    };
    let n = test_raw.n_sims();
    let mut sq = 0.0;
    let mut count = 0usize;
    let batch = batch.max(1);
    let sims: Vec<usize> = (0..n).collect();
    for chunk in sims.chunks(batch) {
        let window = inputs_ds.windows(chunk, 0, t_in)?;
        let mut tape = Tape::with_params(params);
        let pred = rollout_tensor(model, &mut tape, &window, t_out)?;
        let pred = normalizer.denormalize_field(&pred)?;
        let target = test_raw.windows(chunk, t_in, t_out)?;
        sq += pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += pred.len();
    }
    Ok(sq / count as f64)
}
