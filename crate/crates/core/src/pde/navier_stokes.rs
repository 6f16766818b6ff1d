use alloc::vec::Vec;

use num_complex::Complex64;

use super::SpectralGrid;
use crate::error::{config_err, shape_err, Error, Result};
use crate::grid::GridCoords;
use crate::tensor::Tensor;

/// Vorticity-form Navier-Stokes settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NsConfig {
    pub nu: f64,
    /// Forcing field of shape `(nx, ny)`; `None` means unforced.
    pub forcing: Option<Tensor>,
    /// Solver time step.
    pub dt: f64,
}

/// `0.1 * (sin(2 pi (x + y)) + cos(2 pi (x + y)))` on the solver nodes.
pub fn fno_forcing(grid: &GridCoords) -> Tensor {
    let tau = 2.0 * core::f64::consts::PI;
    grid.sample(|x, y| 0.1 * (libm::sin(tau * (x + y)) + libm::cos(tau * (x + y))))
}

/// Pseudo-spectral integrator: explicit Heun on advection and forcing,
/// Crank-Nicolson on diffusion, 2/3-rule dealiasing of the nonlinear term.
#[derive(Debug, Clone)]
pub struct NsSolver {
    sg: SpectralGrid,
    nu: f64,
    dt: f64,
    w_hat: Vec<Complex64>,
    f_hat: Option<Vec<Complex64>>,
    dealias: Vec<bool>,
    steps: usize,
}

impl NsSolver {
    pub fn new(w0: &Tensor, cfg: &NsConfig, grid: &GridCoords) -> Result<Self> {
        if w0.shape() != [grid.nx, grid.ny] {
            return Err(shape_err!("initial vorticity {:?} does not match grid {}x{}", w0.shape(), grid.nx, grid.ny));
        }
        if !(cfg.nu > 0.0) {
            return Err(config_err!("viscosity must be positive, got {}", cfg.nu));
        }
        if !(cfg.dt > 0.0) {
            return Err(config_err!("time step must be positive, got {}", cfg.dt));
        }
        let mut sg = SpectralGrid::new(grid);
        let f_hat = match &cfg.forcing {
            Some(f) if f.shape() != [grid.nx, grid.ny] => {
                return Err(shape_err!("forcing {:?} does not match grid {}x{}", f.shape(), grid.nx, grid.ny))
            }
            Some(f) => Some(sg.forward(f.data())),
            None => None,
        };
        let (nx, ny, half) = (sg.nx, sg.ny, sg.half);
        let mut dealias = Vec::with_capacity(nx * half);
        for i in 0..nx {
            for j in 0..half {
                let kx = sg.kx_index[i].unsigned_abs() as f64;
                let keep = kx <= (2.0 / 3.0) * (nx / 2) as f64 && (j as f64) <= (2.0 / 3.0) * (ny / 2) as f64;
                dealias.push(keep);
            }
        }
        let w_hat = sg.forward(w0.data());
        let s = Self { sg, nu: cfg.nu, dt: cfg.dt, w_hat, f_hat, dealias, steps: 0 };
        let (dx, dy) = grid.spacing();
        let (u, v) = s.velocity_max();
        let cfl = cfg.dt * (u / dx + v / dy);
        if cfl > 1.0 {
            return Err(config_err!("time step {} gives CFL number {cfl:.3} > 1", cfg.dt));
        }
        Ok(s)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn field(&mut self) -> Tensor {
        let data = self.sg.inverse(&self.w_hat);
        Tensor::new(&[self.sg.nx, self.sg.ny], data).expect("solver state matches grid")
    }

    fn velocity_spectra(&self, w_hat: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let half = self.sg.half;
        let mut u = Vec::with_capacity(w_hat.len());
        let mut v = Vec::with_capacity(w_hat.len());
        for (idx, &w) in w_hat.iter().enumerate() {
            let k2 = self.sg.k2[idx];
            let psi = if k2 > 0.0 { w / k2 } else { Complex64::new(0.0, 0.0) };
            let (kx, ky) = (self.sg.kx[idx / half], self.sg.ky[idx % half]);
            u.push(Complex64::new(0.0, ky) * psi);
            v.push(Complex64::new(0.0, -kx) * psi);
        }
        (u, v)
    }

    fn velocity_max(&self) -> (f64, f64) {
        let (u, v) = self.velocity_spectra(&self.w_hat);
        let mut sg = self.sg.clone();
        let ma = |f: Vec<f64>| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (ma(sg.inverse(&u)), ma(sg.inverse(&v)))
    }

    /// Spectrum of `-(u . grad) w + f` with dealiasing applied to the product.
    fn explicit_rhs(&mut self, w_hat: &[Complex64]) -> Vec<Complex64> {
        let half = self.sg.half;
        let (u_hat, v_hat) = self.velocity_spectra(w_hat);
        let wx_hat: Vec<Complex64> =
            w_hat.iter().enumerate().map(|(i, &w)| Complex64::new(0.0, self.sg.kx[i / half]) * w).collect();
        let wy_hat: Vec<Complex64> =
            w_hat.iter().enumerate().map(|(i, &w)| Complex64::new(0.0, self.sg.ky[i % half]) * w).collect();
        let u = self.sg.inverse(&u_hat);
        let v = self.sg.inverse(&v_hat);
        let wx = self.sg.inverse(&wx_hat);
        let wy = self.sg.inverse(&wy_hat);
        let adv: Vec<f64> = (0..u.len()).map(|p| u[p] * wx[p] + v[p] * wy[p]).collect();
        let mut rhs = self.sg.forward(&adv);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = if self.dealias[i] && i != 0 { -*r } else { Complex64::new(0.0, 0.0) };
        }
        if let Some(f) = &self.f_hat {
            rhs.iter_mut().zip(f).for_each(|(r, f)| *r += f);
        }
        rhs
    }

    fn cn_update(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let h = 0.5 * self.dt * self.nu;
        self.w_hat
            .iter()
            .zip(rhs)
            .zip(&self.sg.k2)
            .map(|((&w, &r), &k2)| (w * (1.0 - h * k2) + r * self.dt) / (1.0 + h * k2))
            .collect()
    }

    pub fn step(&mut self) -> Result<()> {
        let w = self.w_hat.clone();
        let r0 = self.explicit_rhs(&w);
        let pred = self.cn_update(&r0);
        let r1 = self.explicit_rhs(&pred);
        let avg: Vec<Complex64> = r0.iter().zip(&r1).map(|(a, b)| (a + b) * 0.5).collect();
        let next = self.cn_update(&avg);
        self.steps += 1;
        if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::SolverBlowUp { step: self.steps });
        }
        self.w_hat = next;
        Ok(())
    }
}

/// Integrates to `t_end` and returns the `n_save` frames at
/// `t_k = k * t_end / n_save`, `k = 1..=n_save`, shape `(n_save, nx, ny)`.
/// The solver step is shortened so that each save interval holds a whole
/// number of steps.
pub fn solve_navier_stokes(
    w0: &Tensor,
    cfg: &NsConfig,
    grid: &GridCoords,
    t_end: f64,
    n_save: usize,
) -> Result<Tensor> {
    if n_save == 0 {
        return Err(config_err!("need at least one saved frame"));
    }
    if !(t_end > 0.0) {
        return Err(config_err!("final time must be positive, got {t_end}"));
    }
    let interval = t_end / n_save as f64;
    let per_save = libm::ceil(interval / cfg.dt - 1e-9).max(1.0) as usize;
    let cfg = NsConfig { dt: interval / per_save as f64, ..cfg.clone() };
    let mut solver = NsSolver::new(w0, &cfg, grid)?;
    let mut frames = Vec::with_capacity(n_save);
    for _ in 0..n_save {
        for _ in 0..per_save {
            solver.step()?;
        }
        frames.push(solver.field());
    }
    Tensor::stack(&frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_stays_at_rest() {
        let g = GridCoords::unit(16).unwrap();
        let cfg = NsConfig { nu: 1e-3, forcing: None, dt: 0.01 };
        let traj = solve_navier_stokes(&Tensor::zeros(&[16, 16]), &cfg, &g, 0.1, 2).unwrap();
        assert_eq!(traj.max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let g = GridCoords::unit(16).unwrap();
        let w0 = Tensor::zeros(&[16, 16]);
        let cfg = NsConfig { nu: 0.0, forcing: None, dt: 0.01 };
        assert!(NsSolver::new(&w0, &cfg, &g).is_err());
        let cfg = NsConfig { nu: 1e-3, forcing: Some(Tensor::zeros(&[8, 8])), dt: 0.01 };
        assert!(NsSolver::new(&w0, &cfg, &g).is_err());
        let cfg = NsConfig { nu: 1e-3, forcing: None, dt: 0.01 };
        assert!(NsSolver::new(&Tensor::zeros(&[4, 4]), &cfg, &g).is_err());
        assert!(solve_navier_stokes(&w0, &cfg, &g, 1.0, 0).is_err());
    }

    #[test]
    fn huge_step_fails_cfl() {
        let g = GridCoords::unit(32).unwrap();
        let w0 = g.sample(|x, _| 50.0 * libm::sin(2.0 * core::f64::consts::PI * x));
        let cfg = NsConfig { nu: 1e-3, forcing: None, dt: 1.0 };
        assert!(matches!(NsSolver::new(&w0, &cfg, &g), Err(Error::Config(_))));
    }
}
