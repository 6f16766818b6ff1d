#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectralseq_core::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Direct O(N^2) DFT of one real `nx x ny` plane, keeping columns `0..=ny/2`.
pub fn brute_rdft2(plane: &[f64], nx: usize, ny: usize) -> Vec<Complex64> {
    let half = ny / 2 + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); nx * half];
    for kx in 0..nx {
        for ky in 0..half {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..nx {
                for q in 0..ny {
                    let th = -2.0 * PI * ((kx * p) as f64 / nx as f64 + (ky * q) as f64 / ny as f64);
                    acc += plane[p * ny + q] * Complex64::new(th.cos(), th.sin());
                }
            }
            out[kx * half + ky] = acc;
        }
    }
    out
}

/// Direct inverse of a half spectrum: rebuilds the full spectrum by
/// Hermitian symmetry and sums every mode.
pub fn brute_irdft2(spec: &[Complex64], nx: usize, ny: usize) -> Vec<f64> {
    let half = ny / 2 + 1;
    let full = |kx: usize, ky: usize| -> Complex64 {
        if ky < half {
            spec[kx * half + ky]
        } else {
            spec[((nx - kx) % nx) * half + (ny - ky)].conj()
        }
    };
    let mut out = vec![0.0; nx * ny];
    for p in 0..nx {
        for q in 0..ny {
            let mut acc = Complex64::new(0.0, 0.0);
            for kx in 0..nx {
                for ky in 0..ny {
                    let th = 2.0 * PI * ((kx * p) as f64 / nx as f64 + (ky * q) as f64 / ny as f64);
                    acc += full(kx, ky) * Complex64::new(th.cos(), th.sin());
                }
            }
            out[p * ny + q] = acc.re / (nx * ny) as f64;
        }
    }
    out
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn meta(t_in: usize, t_out: usize) -> spectralseq_core::data::DatasetMeta {
    spectralseq_core::data::DatasetMeta {
        pde: "test".into(),
        nu: 1.0,
        domain: ((-1.0, 1.0), (-1.0, 1.0)),
        dt_save: 0.1,
        seed: 0,
        generator_version: "test".into(),
        t_in,
        t_out,
    }
}

pub fn random_dataset(
    sims: usize,
    frames: usize,
    n: usize,
    t_in: usize,
    seed: u64,
) -> spectralseq_core::data::TrajectoryDataset {
    let frames_t = random_tensor(&[sims, frames, n, n], &mut rng(seed));
    spectralseq_core::data::TrajectoryDataset::new(frames_t, meta(t_in, frames - t_in)).unwrap()
}

/// Smooth travelling-wave trajectories that a small model can learn.
pub fn smooth_dataset(sims: usize, frames: usize, n: usize, t_in: usize) -> spectralseq_core::data::TrajectoryDataset {
    let data = Tensor::from_fn(&[sims, frames, n, n], |k| {
        let j = k % n;
        let i = (k / n) % n;
        let t = (k / (n * n)) % frames;
        let s = k / (n * n * frames);
        let phase = 0.3 * s as f64 + 0.15 * t as f64;
        (2.0 * PI * i as f64 / n as f64 + phase).sin() * (2.0 * PI * j as f64 / n as f64).cos()
    });
    spectralseq_core::data::TrajectoryDataset::new(data, meta(t_in, frames - t_in)).unwrap()
}
