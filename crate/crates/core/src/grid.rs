use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::tensor::Tensor;

/// A uniform periodic grid over a rectangular domain.
///
/// Solver nodes exclude the right endpoint (`x_i = x0 + i * dx`, `dx = L / nx`).
/// Coordinate channels fed to the models span the closed domain instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCoords {
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl GridCoords {
    pub fn new(nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(config_err!("grid needs at least 2 points per axis, got {nx}x{ny}"));
        }
        if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
            return Err(config_err!("empty domain {:?} x {:?}", x_range, y_range));
        }
        Ok(Self { nx, ny, x_range, y_range })
    }

    /// The wave-equation domain `(-1, 1)^2`.
    pub fn wave(n: usize) -> Result<Self> {
        Self::new(n, n, (-1.0, 1.0), (-1.0, 1.0))
    }

    /// The Navier-Stokes domain `(0, 1)^2`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.x_range.1 - self.x_range.0, self.y_range.1 - self.y_range.0)
    }

    pub fn spacing(&self) -> (f64, f64) {
        let (lx, ly) = self.lengths();
        (lx / self.nx as f64, ly / self.ny as f64)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + i as f64 * self.spacing().0
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_range.0 + j as f64 * self.spacing().1
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Samples `f(x, y)` on the solver nodes into a `(nx, ny)` array.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let ny = self.ny;
        Tensor::from_fn(&[self.nx, ny], |p| f(self.x(p / ny), self.y(p % ny)))
    }

    /// `(batch, nx, ny, 2)` channels holding x and y, spanning the closed domain.
    pub fn coordinate_channels(&self, batch: usize) -> Tensor {
        let (nx, ny) = (self.nx, self.ny);
        let cx = |i: usize| self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / (nx - 1) as f64;
        let cy = |j: usize| self.y_range.0 + (self.y_range.1 - self.y_range.0) * j as f64 / (ny - 1) as f64;
        Tensor::from_fn(&[batch, nx, ny, 2], |k| {
            let p = (k / 2) % (nx * ny);
            if k % 2 == 0 {
                cx(p / ny)
            } else {
                cy(p % ny)
            }
        })
    }
}
