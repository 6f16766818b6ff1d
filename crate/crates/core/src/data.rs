//! In-memory trajectory datasets, noise corruption, splitting and batching.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Result};
use crate::tensor::Tensor;

/// Provenance recorded alongside the frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub pde: String,
    pub nu: f64,
    pub domain: ((f64, f64), (f64, f64)),
    pub dt_save: f64,
    pub seed: u64,
    pub generator_version: String,
    /// Input/output frame counts the case is set up for.
    pub t_in: usize,
    pub t_out: usize,
}

/// Simulations stored as `(n_sims, n_frames, nx, ny)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub frames: Tensor,
    pub meta: DatasetMeta,
}

impl TrajectoryDataset {
    pub fn new(frames: Tensor, meta: DatasetMeta) -> Result<Self> {
        if frames.rank() != 4 {
            return Err(shape_err!("dataset frames must be (sims, frames, nx, ny), got {:?}", frames.shape()));
        }
        if !frames.is_finite() {
            return Err(config_err!("dataset contains non-finite values"));
        }
        Ok(Self { frames, meta })
    }

    pub fn dims(&self) -> [usize; 4] {
        let s = self.frames.shape();
        [s[0], s[1], s[2], s[3]]
    }

    pub fn n_sims(&self) -> usize {
        self.dims()[0]
    }

    pub fn n_frames(&self) -> usize {
        self.dims()[1]
    }

    /// Keeps simulations `[start, start + n)`.
    pub fn slice_sims(&self, start: usize, n: usize) -> Result<Self> {
        let [sims, f, nx, ny] = self.dims();
        if start + n > sims {
            return Err(shape_err!("simulations [{start}, {}) out of range ({sims})", start + n));
        }
        let per = f * nx * ny;
        let data = self.frames.data()[start * per..(start + n) * per].to_vec();
        Ok(Self { frames: Tensor::new(&[n, f, nx, ny], data)?, meta: self.meta.clone() })
    }

    /// Frames `[start, start + len)` of simulation `sim`, laid out as `(nx, ny, len)`.
    pub fn window(&self, sim: usize, start: usize, len: usize) -> Tensor {
        let [_, f, nx, ny] = self.dims();
        let plane = nx * ny;
        let base = sim * f * plane;
        let d = self.frames.data();
        Tensor::from_fn(&[nx, ny, len], |k| {
            let (p, t) = (k / len, k % len);
            d[base + (start + t) * plane + p]
        })
    }

    /// Stacks windows of several simulations into `(batch, nx, ny, len)`.
    pub fn windows(&self, sims: &[usize], start: usize, len: usize) -> Result<Tensor> {
        let parts: Vec<Tensor> = sims.iter().map(|&s| self.window(s, start, len)).collect();
        Tensor::stack(&parts)
    }

    /// Keeps every `factor`-th grid point along both axes.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        let [sims, f, nx, ny] = self.dims();
        if factor == 0 || nx % factor != 0 || ny % factor != 0 {
            return Err(config_err!("cannot subsample a {nx}x{ny} grid by {factor}"));
        }
        let (mx, my) = (nx / factor, ny / factor);
        let d = self.frames.data();
        let frames = Tensor::from_fn(&[sims, f, mx, my], |k| {
            let j = k % my;
            let i = (k / my) % mx;
            let sf = k / (mx * my);
            d[(sf * nx + i * factor) * ny + j * factor]
        });
        Ok(Self { frames, meta: self.meta.clone() })
    }
}

/// Additive Gaussian corruption; `variance` is the noise factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

/// `x + g` with `g ~ N(0, variance)` i.i.d. per element.
pub fn add_noise(x: &Tensor, spec: &NoiseSpec) -> Result<Tensor> {
    if !(spec.variance >= 0.0) || !spec.variance.is_finite() {
        return Err(config_err!("noise variance must be finite and >= 0, got {}", spec.variance));
    }
    if spec.variance == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, libm::sqrt(spec.variance)).map_err(|e| config_err!("{e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(out)
}

/// Mixes extra words into a seed so derived streams are independent of
/// iteration order.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ a) ^ b.rotate_left(17))
}

/// Corrupts every simulation with its own derived noise stream.
pub fn corrupt_dataset(ds: &TrajectoryDataset, variance: f64, seed: u64, epoch: u64) -> Result<TrajectoryDataset> {
    let [sims, f, nx, ny] = ds.dims();
    let per = f * nx * ny;
    let mut data = Vec::with_capacity(ds.frames.len());
    for s in 0..sims {
        let sim = Tensor::new(&[per], ds.frames.data()[s * per..(s + 1) * per].to_vec())?;
        let spec = NoiseSpec { variance, seed: derive_seed(seed, s as u64, epoch) };
        data.extend_from_slice(add_noise(&sim, &spec)?.data());
    }
    Ok(TrajectoryDataset { frames: Tensor::new(&[sims, f, nx, ny], data)?, meta: ds.meta.clone() })
}

/// First `n_train` simulations for training, last `n_test` for testing.
pub fn split(ds: &TrajectoryDataset, n_train: usize, n_test: usize) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    let n = ds.n_sims();
    if n_train + n_test > n {
        return Err(config_err!("split {n_train}+{n_test} exceeds {n} simulations"));
    }
    Ok((ds.slice_sims(0, n_train)?, ds.slice_sims(n - n_test, n_test)?))
}

/// Where batch inputs and targets come from. All datasets are in normalized space.
#[derive(Debug, Clone, Copy)]
pub struct BatchSource<'a> {
    pub clean: &'a TrajectoryDataset,
    /// Noise-corrupted copy of `clean`, if training with noise.
    pub noisy: Option<&'a TrajectoryDataset>,
    /// Draw targets from the noisy copy too.
    pub corrupt_targets: bool,
    pub t_in: usize,
    pub t_out: usize,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub sims: Vec<usize>,
    /// `(batch, nx, ny, t_in)`.
    pub inputs: Tensor,
    /// `(batch, nx, ny, t_out)`.
    pub targets: Tensor,
}

pub struct BatchIter<'a> {
    src: BatchSource<'a>,
    order: Vec<usize>,
    batch: usize,
    pos: usize,
}

impl Iterator for BatchIter<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let sims = self.order[self.pos..end].to_vec();
        self.pos = end;
        let src = &self.src;
        let input_ds = src.noisy.unwrap_or(src.clean);
        let target_ds = if src.corrupt_targets { input_ds } else { src.clean };
        Some((|| {
            Ok(Batch {
                inputs: input_ds.windows(&sims, 0, src.t_in)?,
                targets: target_ds.windows(&sims, src.t_in, src.t_out)?,
                sims,
            })
        })())
    }
}

/// Seeded per-epoch shuffle into batches of `batch`; the last batch may be short.
pub fn batch_iter<'a>(src: BatchSource<'a>, batch: usize, seed: u64, epoch: u64) -> Result<BatchIter<'a>> {
    let n = src.clean.n_sims();
    if batch == 0 || batch > n {
        return Err(config_err!("batch size {batch} must be in 1..={n}"));
    }
    if src.t_in + src.t_out > src.clean.n_frames() {
        return Err(shape_err!("T_in + T_out = {} exceeds {} frames", src.t_in + src.t_out, src.clean.n_frames()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed, epoch)));
    Ok(BatchIter { src, order, batch, pos: 0 })
}
