//! Ground-truth trajectory generators.

mod grf;
mod lhs;
mod navier_stokes;
mod wave;

pub use grf::{gaussian_random_field, GrfSpec};
pub use lhs::{lhs_sample, lhs_wave_ics, WaveRanges};
pub use navier_stokes::{fno_forcing, solve_navier_stokes, NsConfig, NsSolver};
pub use wave::{solve_wave, solve_wave_with_dt, wave_initial_condition, wave_stable_dt, WaveIC, WaveSolver};

use alloc::string::ToString;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetMeta, TrajectoryDataset};
use crate::error::Result;
use crate::fft::{hermitian_weight, Fft2Plan};
use crate::grid::GridCoords;
use crate::tensor::Tensor;

pub const GENERATOR_VERSION: &str = concat!("spectralseq-core ", env!("CARGO_PKG_VERSION"));

/// Fourier collocation helpers for one periodic grid.
#[derive(Debug, Clone)]
pub(crate) struct SpectralGrid {
    pub nx: usize,
    pub ny: usize,
    pub half: usize,
    plan: Fft2Plan,
    /// Angular wavenumbers of the full x axis; the Nyquist entry is zero.
    pub kx: Vec<f64>,
    /// Angular wavenumbers of the half y axis; the Nyquist entry is zero.
    pub ky: Vec<f64>,
    /// `|k|^2` per half-spectrum entry, Nyquist included.
    pub k2: Vec<f64>,
    pub kx_index: Vec<i64>,
}

impl SpectralGrid {
    pub fn new(grid: &GridCoords) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (lx, ly) = grid.lengths();
        let half = ny / 2 + 1;
        let two_pi = 2.0 * core::f64::consts::PI;
        let kx_index: Vec<i64> = (0..nx).map(|m| if m <= nx / 2 { m as i64 } else { m as i64 - nx as i64 }).collect();
        let kx_full: Vec<f64> = kx_index.iter().map(|&m| two_pi * m as f64 / lx).collect();
        let ky_full: Vec<f64> = (0..half).map(|j| two_pi * j as f64 / ly).collect();
        let mut k2 = Vec::with_capacity(nx * half);
        for &kx in &kx_full {
            for &ky in &ky_full {
                k2.push(kx * kx + ky * ky);
            }
        }
        let kx = kx_full.iter().enumerate().map(|(m, &k)| if nx % 2 == 0 && m == nx / 2 { 0.0 } else { k }).collect();
        let ky = ky_full.iter().enumerate().map(|(j, &k)| if ny % 2 == 0 && j == ny / 2 { 0.0 } else { k }).collect();
        Self { nx, ny, half, plan: Fft2Plan::new(nx, ny), kx, ky, k2, kx_index }
    }

    pub fn forward(&mut self, field: &[f64]) -> Vec<Complex64> {
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); self.nx * self.half];
        self.plan.forward_plane(field, self.half, &mut out);
        out
    }

    pub fn inverse(&mut self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        let mut out = alloc::vec![0.0; self.nx * self.ny];
        self.plan.inverse_plane(&mut buf, self.half, &mut out);
        out
    }

    /// `sum_grid |grad f|^2` from the half spectrum of `f` (Parseval).
    pub fn grad_sq_sum(&self, spec: &[Complex64]) -> f64 {
        let n = (self.nx * self.ny) as f64;
        let mut s = 0.0;
        for i in 0..self.nx {
            for j in 0..self.half {
                let idx = i * self.half + j;
                s += hermitian_weight(j, self.ny) * self.k2[idx] * spec[idx].norm_sqr();
            }
        }
        s / n
    }
}

/// The three benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Wave,
    NsLaminar,
    NsTurbulent,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Wave => "wave",
            Case::NsLaminar => "ns_laminar",
            Case::NsTurbulent => "ns_turbulent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wave" => Some(Case::Wave),
            "ns_laminar" => Some(Case::NsLaminar),
            "ns_turbulent" => Some(Case::NsTurbulent),
            _ => None,
        }
    }

    /// `(T_in, T_out)` for the case.
    pub fn window(self) -> (usize, usize) {
        match self {
            Case::Wave => (20, 30),
            Case::NsLaminar => (20, 20),
            Case::NsTurbulent => (10, 10),
        }
    }

    pub fn n_frames(self) -> usize {
        let (a, b) = self.window();
        a + b
    }

    pub fn nu(self) -> f64 {
        match self {
            Case::Wave => 1.0,
            Case::NsLaminar => 1e-3,
            Case::NsTurbulent => 1e-5,
        }
    }

    pub fn grid(self, n: usize) -> Result<GridCoords> {
        match self {
            Case::Wave => GridCoords::wave(n),
            _ => GridCoords::unit(n),
        }
    }
}

/// Knobs for dataset generation beyond the case defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub wave_ranges: WaveRanges,
    /// Navier-Stokes solver step.
    pub ns_dt: f64,
    /// Time between saved Navier-Stokes frames.
    pub ns_dt_save: f64,
    pub grf: GrfSpec,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { wave_ranges: WaveRanges::default(), ns_dt: 5e-3, ns_dt_save: 1.0, grf: GrfSpec::default() }
    }
}

/// Generates one simulation. Simulation `i` of a dataset depends only on
/// `(seed, i)` so simulations can be produced in any order.
pub fn generate_sim(
    case: Case,
    grid: &GridCoords,
    seed: u64,
    index: usize,
    n_sims: usize,
    cfg: &GenerateConfig,
) -> Result<Tensor> {
    match case {
        Case::Wave => {
            let ics = lhs_wave_ics(n_sims, &cfg.wave_ranges, seed)?;
            let u0 = wave_initial_condition(&ics[index], grid)?;
            solve_wave(&u0, grid, case.nu(), 1.0, case.n_frames())
        }
        Case::NsLaminar | Case::NsTurbulent => {
            let w0 = gaussian_random_field(grid, &cfg.grf, seed.wrapping_add(index as u64))?;
            let ns = NsConfig { nu: case.nu(), forcing: Some(fno_forcing(grid)), dt: cfg.ns_dt };
            let t = cfg.ns_dt_save * case.n_frames() as f64;
            solve_navier_stokes(&w0, &ns, grid, t, case.n_frames())
        }
    }
}

pub fn dataset_meta(case: Case, grid: &GridCoords, seed: u64, cfg: &GenerateConfig) -> DatasetMeta {
    let (t_in, t_out) = case.window();
    let dt_save = match case {
        Case::Wave => 1.0 / (case.n_frames() - 1) as f64,
        _ => cfg.ns_dt_save,
    };
    DatasetMeta {
        pde: case.name().to_string(),
        nu: case.nu(),
        domain: (grid.x_range, grid.y_range),
        dt_save,
        seed,
        generator_version: GENERATOR_VERSION.to_string(),
        t_in,
        t_out,
    }
}

/// Serial dataset generation.
pub fn generate(case: Case, n_sims: usize, n: usize, seed: u64, cfg: &GenerateConfig) -> Result<TrajectoryDataset> {
    let grid = case.grid(n)?;
    let sims = (0..n_sims).map(|i| generate_sim(case, &grid, seed, i, n_sims, cfg)).collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::new(Tensor::stack(&sims)?, dataset_meta(case, &grid, seed, cfg))
}
