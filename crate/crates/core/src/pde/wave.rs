use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpectralGrid;
use crate::error::{config_err, shape_err, Result};
use crate::grid::GridCoords;
use crate::tensor::Tensor;

/// Gaussian bump `exp(-a((x - b)^2 + (y - c)^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveIC {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WaveIC {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        libm::exp(-self.a * ((x - self.b) * (x - self.b) + (y - self.c) * (y - self.c)))
    }
}

/// Samples the initial condition on the solver nodes, shape `(nx, ny)`.
pub fn wave_initial_condition(ic: &WaveIC, grid: &GridCoords) -> Result<Tensor> {
    if !(ic.a > 0.0) {
        return Err(config_err!("Gaussian width parameter must be positive, got {}", ic.a));
    }
    Ok(grid.sample(|x, y| ic.value(x, y)))
}

/// Largest stable leapfrog step for `u_tt = nu * lap(u)` on `grid`.
pub fn wave_stable_dt(grid: &GridCoords, nu: f64) -> f64 {
    let sg = SpectralGrid::new(grid);
    let k2max = sg.k2.iter().cloned().fold(0.0, f64::max);
    2.0 / libm::sqrt(nu * k2max)
}

/// Leapfrog integrator with a Fourier Laplacian. Holds the levels `n - 1`
/// and `n`.
#[derive(Debug, Clone)]
pub struct WaveSolver {
    sg: SpectralGrid,
    nu: f64,
    dt: f64,
    cell: f64,
    prev: Vec<f64>,
    curr: Vec<f64>,
    steps: usize,
}

impl WaveSolver {
    /// Starts from rest. Zero initial velocity makes the level before `u0`
    /// equal to the level after it, `u0 + dt^2/2 * nu * lap(u0)`.
    pub fn new(u0: &Tensor, grid: &GridCoords, nu: f64, dt: f64) -> Result<Self> {
        if u0.shape() != [grid.nx, grid.ny] {
            return Err(shape_err!("initial field {:?} does not match grid {}x{}", u0.shape(), grid.nx, grid.ny));
        }
        if !(nu > 0.0) {
            return Err(config_err!("wave speed parameter must be positive, got {nu}"));
        }
        let limit = wave_stable_dt(grid, nu);
        if !(dt > 0.0) || dt >= limit {
            return Err(config_err!("leapfrog step {dt} violates the stability bound dt < {limit}"));
        }
        let (dx, dy) = grid.spacing();
        let mut s = Self {
            sg: SpectralGrid::new(grid),
            nu,
            dt,
            cell: dx * dy,
            prev: Vec::new(),
            curr: u0.data().to_vec(),
            steps: 0,
        };
        let lap = s.laplacian(u0.data());
        s.prev = u0.data().iter().zip(&lap).map(|(u, l)| u + 0.5 * dt * dt * nu * l).collect();
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn laplacian(&mut self, u: &[f64]) -> Vec<f64> {
        let mut spec = self.sg.forward(u);
        for (c, &k2) in spec.iter_mut().zip(&self.sg.k2) {
            *c *= -k2;
        }
        self.sg.inverse(&spec)
    }

    fn next_level(&mut self) -> Vec<f64> {
        let curr = core::mem::take(&mut self.curr);
        let lap = self.laplacian(&curr);
        let c = self.dt * self.dt * self.nu;
        let next = curr.iter().zip(&self.prev).zip(&lap).map(|((u, p), l)| 2.0 * u - p + c * l).collect();
        self.curr = curr;
        next
    }

    /// Field at the current level, shape `(nx, ny)`.
    pub fn field(&self) -> Tensor {
        Tensor::new(&[self.sg.nx, self.sg.ny], self.curr.clone()).expect("solver state matches grid")
    }

    pub fn step(&mut self) -> Result<()> {
        let next = self.next_level();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::Error::SolverBlowUp { step: self.steps + 1 });
        }
        self.prev = core::mem::replace(&mut self.curr, next);
        self.steps += 1;
        Ok(())
    }

    /// Flips the sign of the velocity: subsequent steps run backwards in time.
    pub fn reverse(&mut self) {
        self.prev = self.next_level();
    }

    /// `sum (u_t^2 + nu |grad u|^2) dx dy` at the current level, with `u_t`
    /// a centred difference.
    pub fn energy(&mut self) -> f64 {
        let next = self.next_level();
        let ut2: f64 = next
            .iter()
            .zip(&self.prev)
            .map(|(a, b)| {
                let v = (a - b) / (2.0 * self.dt);
                v * v
            })
            .sum();
        let spec: Vec<Complex64> = self.sg.forward(&self.curr);
        let grad2 = self.sg.grad_sq_sum(&spec);
        (ut2 + self.nu * grad2) * self.cell
    }
}

/// Integrates from rest with a step of half the stability limit, rounded
/// down so that a whole number of steps separates saved frames. Returns
/// `n_save` frames evenly spaced on `[0, t_end]`, shape `(n_save, nx, ny)`.
pub fn solve_wave(u0: &Tensor, grid: &GridCoords, nu: f64, t_end: f64, n_save: usize) -> Result<Tensor> {
    if n_save < 2 {
        return Err(config_err!("need at least 2 saved frames, got {n_save}"));
    }
    if !(t_end > 0.0) {
        return Err(config_err!("final time must be positive, got {t_end}"));
    }
    if !(nu > 0.0) {
        return Err(config_err!("wave speed parameter must be positive, got {nu}"));
    }
    let interval = t_end / (n_save - 1) as f64;
    let target = 0.5 * wave_stable_dt(grid, nu);
    let per_save = libm::ceil(interval / target).max(1.0) as usize;
    solve_wave_with_dt(u0, grid, nu, interval / per_save as f64, per_save, n_save)
}

/// Leapfrog with an explicit step; `per_save` steps separate saved frames.
pub fn solve_wave_with_dt(
    u0: &Tensor,
    grid: &GridCoords,
    nu: f64,
    dt: f64,
    per_save: usize,
    n_save: usize,
) -> Result<Tensor> {
    if n_save < 1 || per_save < 1 {
        return Err(config_err!("need at least one frame and one step per frame"));
    }
    let mut solver = WaveSolver::new(u0, grid, nu, dt)?;
    let mut frames = Vec::with_capacity(n_save);
    frames.push(solver.field());
    for _ in 1..n_save {
        for _ in 0..per_save {
            solver.step()?;
        }
        frames.push(solver.field());
    }
    Tensor::stack(&frames)
}
