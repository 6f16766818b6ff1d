use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SpectralGrid;
use crate::error::{config_err, Result};
use crate::grid::GridCoords;
use crate::tensor::Tensor;

/// Spectrum `sigma * (1 + (|k| / tau)^2)^(-alpha / 2)` of a Gaussian random
/// field, `|k|` being the angular wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrfSpec {
    pub alpha: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl Default for GrfSpec {
    fn default() -> Self {
        Self { alpha: 2.5, tau: 7.0, sigma: 1.0 }
    }
}

impl GrfSpec {
    pub fn amplitude(&self, k: f64) -> f64 {
        self.sigma * libm::pow(1.0 + (k / self.tau) * (k / self.tau), -self.alpha / 2.0)
    }
}

/// Zero-mean periodic random field on `grid`, shape `(nx, ny)`.
pub fn gaussian_random_field(grid: &GridCoords, spec: &GrfSpec, seed: u64) -> Result<Tensor> {
    if !(spec.alpha > 0.0 && spec.tau > 0.0 && spec.sigma > 0.0) {
        return Err(config_err!("GRF decay parameters must be positive, got {spec:?}"));
    }
    let mut sg = SpectralGrid::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.nx * grid.ny;
    let white: alloc::vec::Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut spec_c = sg.forward(&white);
    let scale = 1.0 / libm::sqrt(n as f64);
    for (c, &k2) in spec_c.iter_mut().zip(&sg.k2) {
        *c *= spec.amplitude(libm::sqrt(k2)) * scale;
    }
    spec_c[0] = num_complex::Complex64::new(0.0, 0.0);
    let mut field = sg.inverse(&spec_c);
    // The Nyquist row may leave a tiny mean behind through the real-part projection.
    let mean = field.iter().sum::<f64>() / n as f64;
    field.iter_mut().for_each(|v| *v -= mean);
    Tensor::new(&[grid.nx, grid.ny], field)
}
