//! Radix-2 / direct complex FFTs and the batched 2-D real transforms built on them.
//!
//! Convention: the forward transform is unnormalized, the inverse carries
//! `1 / (nx * ny)`. Real transforms keep the `ny / 2 + 1` non-redundant
//! columns of the last spatial axis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// Precomputed plan for a complex transform of fixed length.
#[derive(Debug, Clone)]
pub struct Fft1d {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Option<Vec<usize>>,
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let twiddles = (0..n)
            .map(|j| {
                let a = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect()
        });
        Self { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X_k = sum_j x_j e^{-2 pi i jk/n}`.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.transform(buf, false, scratch);
    }

    /// Unnormalized backward transform, `x_j = sum_k X_k e^{+2 pi i jk/n}`.
    pub fn backward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.transform(buf, true, scratch);
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool, scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(buf.len(), self.n);
        let n = self.n;
        match &self.bitrev {
            Some(rev) => {
                for (i, &j) in rev.iter().enumerate() {
                    if i < j {
                        buf.swap(i, j);
                    }
                }
                let mut len = 2;
                while len <= n {
                    let half = len / 2;
                    let stride = n / len;
                    for start in (0..n).step_by(len) {
                        for j in 0..half {
                            let mut w = self.twiddles[j * stride];
                            if inverse {
                                w = w.conj();
                            }
                            let u = buf[start + j];
                            let v = buf[start + j + half] * w;
                            buf[start + j] = u + v;
                            buf[start + j + half] = u - v;
                        }
                    }
                    len <<= 1;
                }
            }
            None => {
                scratch.clear();
                scratch.extend_from_slice(buf);
                for (k, out) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, &x) in scratch.iter().enumerate() {
                        let mut w = self.twiddles[(j * k) % n];
                        if inverse {
                            w = w.conj();
                        }
                        acc += x * w;
                    }
                    *out = acc;
                }
            }
        }
    }
}

/// Weight of a half-spectrum column in Hermitian sums: the DC and Nyquist
/// columns appear once, every other column stands for itself and its mirror.
#[inline]
pub fn hermitian_weight(ky: usize, ny: usize) -> f64 {
    if ky == 0 || (ny.is_multiple_of(2) && ky == ny / 2) {
        1.0
    } else {
        2.0
    }
}

/// Plans and scratch space for real 2-D transforms on an `nx x ny` plane.
#[derive(Debug, Clone)]
pub struct Fft2Plan {
    nx: usize,
    ny: usize,
    rows: Fft1d,
    cols: Fft1d,
    row_buf: Vec<Complex64>,
    col_buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2Plan {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            rows: Fft1d::new(ny),
            cols: Fft1d::new(nx),
            row_buf: vec![Complex64::new(0.0, 0.0); ny],
            col_buf: vec![Complex64::new(0.0, 0.0); nx],
            scratch: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Number of non-redundant columns, `ny / 2 + 1`.
    pub fn half(&self) -> usize {
        self.ny / 2 + 1
    }

    /// Forward real transform of one plane, keeping only columns `ky < kcols`.
    /// `out` is `nx x kcols`, row-major.
    pub fn forward_plane(&mut self, plane: &[f64], kcols: usize, out: &mut [Complex64]) {
        let (nx, ny) = (self.nx, self.ny);
        debug_assert!(kcols <= self.half());
        debug_assert_eq!(plane.len(), nx * ny);
        debug_assert_eq!(out.len(), nx * kcols);
        for ix in 0..nx {
            for (iy, slot) in self.row_buf.iter_mut().enumerate() {
                *slot = Complex64::new(plane[ix * ny + iy], 0.0);
            }
            self.rows.forward(&mut self.row_buf, &mut self.scratch);
            out[ix * kcols..(ix + 1) * kcols].copy_from_slice(&self.row_buf[..kcols]);
        }
        for ky in 0..kcols {
            for ix in 0..nx {
                self.col_buf[ix] = out[ix * kcols + ky];
            }
            self.cols.forward(&mut self.col_buf, &mut self.scratch);
            for ix in 0..nx {
                out[ix * kcols + ky] = self.col_buf[ix];
            }
        }
    }

    /// Inverse real transform of a half spectrum whose columns `ky >= kcols`
    /// are zero. `spec` is `nx x kcols` and is overwritten. Imaginary parts of
    /// the DC and Nyquist columns are discarded.
    pub fn inverse_plane(&mut self, spec: &mut [Complex64], kcols: usize, out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        debug_assert!(kcols <= self.half());
        debug_assert_eq!(spec.len(), nx * kcols);
        debug_assert_eq!(out.len(), nx * ny);
        for ky in 0..kcols {
            for ix in 0..nx {
                self.col_buf[ix] = spec[ix * kcols + ky];
            }
            self.cols.backward(&mut self.col_buf, &mut self.scratch);
            for ix in 0..nx {
                spec[ix * kcols + ky] = self.col_buf[ix];
            }
        }
        let norm = 1.0 / (nx * ny) as f64;
        let zero = Complex64::new(0.0, 0.0);
        for ix in 0..nx {
            self.row_buf.iter_mut().for_each(|c| *c = zero);
            for ky in 0..kcols {
                let c = spec[ix * kcols + ky];
                self.row_buf[ky] = c;
                if ky != 0 && ky != ny - ky {
                    self.row_buf[ny - ky] = c.conj();
                }
            }
            self.rows.backward(&mut self.row_buf, &mut self.scratch);
            for iy in 0..ny {
                out[ix * ny + iy] = self.row_buf[iy].re * norm;
            }
        }
    }
}

/// Complex half spectrum of a batched field, shape `(batch, nx, ny/2 + 1, channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    shape: [usize; 4],
    ny: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(batch: usize, nx: usize, ny: usize, channels: usize) -> Self {
        let shape = [batch, nx, ny / 2 + 1, channels];
        Self { shape, ny, data: vec![Complex64::new(0.0, 0.0); shape.iter().product()] }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    /// Length of the real spatial axis this spectrum was taken over.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, kx: usize, ky: usize, c: usize) -> usize {
        let [_, nkx, nky, nc] = self.shape;
        ((b * nkx + kx) * nky + ky) * nc + c
    }

    pub fn get(&self, b: usize, kx: usize, ky: usize, c: usize) -> Complex64 {
        self.data[self.index(b, kx, ky, c)]
    }

    pub fn set(&mut self, b: usize, kx: usize, ky: usize, c: usize, v: Complex64) {
        let i = self.index(b, kx, ky, c);
        self.data[i] = v;
    }
}

pub(crate) fn field_dims(f: &Tensor) -> Result<[usize; 4]> {
    match *f.shape() {
        [b, nx, ny, c] => Ok([b, nx, ny, c]),
        ref s => Err(shape_err!("expected a (batch, nx, ny, channels) field, got shape {:?}", s)),
    }
}

/// Copies channel `c` of batch item `b` into a contiguous `nx x ny` plane.
pub(crate) fn gather_plane(f: &[f64], dims: [usize; 4], b: usize, c: usize, plane: &mut [f64]) {
    let [_, nx, ny, nc] = dims;
    let base = b * nx * ny;
    for (p, slot) in plane.iter_mut().enumerate() {
        *slot = f[(base + p) * nc + c];
    }
}

pub(crate) fn scatter_plane(plane: &[f64], dims: [usize; 4], b: usize, c: usize, f: &mut [f64]) {
    let [_, nx, ny, nc] = dims;
    let base = b * nx * ny;
    for (p, &v) in plane.iter().enumerate() {
        f[(base + p) * nc + c] = v;
    }
}

/// Batched forward real 2-D transform over the spatial axes.
pub fn rfft2(f: &Tensor) -> Result<Spectrum> {
    let dims @ [batch, nx, ny, nc] = field_dims(f)?;
    if nx < 2 || ny < 2 {
        return Err(shape_err!("rfft2 needs nx, ny >= 2, got {}x{}", nx, ny));
    }
    let mut plan = Fft2Plan::new(nx, ny);
    let half = plan.half();
    let mut out = Spectrum::zeros(batch, nx, ny, nc);
    let mut plane = vec![0.0; nx * ny];
    let mut spec = vec![Complex64::new(0.0, 0.0); nx * half];
    for b in 0..batch {
        for c in 0..nc {
            gather_plane(f.data(), dims, b, c, &mut plane);
            plan.forward_plane(&plane, half, &mut spec);
            for kx in 0..nx {
                for ky in 0..half {
                    out.set(b, kx, ky, c, spec[kx * half + ky]);
                }
            }
        }
    }
    Ok(out)
}

/// Batched inverse real 2-D transform back onto an `nx x ny` grid.
pub fn irfft2(s: &Spectrum, nx: usize, ny: usize) -> Result<Tensor> {
    let [batch, skx, sky, nc] = s.shape;
    if skx != nx || sky != ny / 2 + 1 || nx < 2 || ny < 2 {
        return Err(shape_err!("spectrum {:?} inconsistent with a {}x{} grid", s.shape, nx, ny));
    }
    let dims = [batch, nx, ny, nc];
    let mut plan = Fft2Plan::new(nx, ny);
    let half = plan.half();
    let mut out = Tensor::zeros(&dims);
    let mut plane = vec![0.0; nx * ny];
    let mut spec = vec![Complex64::new(0.0, 0.0); nx * half];
    for b in 0..batch {
        for c in 0..nc {
            for kx in 0..nx {
                for ky in 0..half {
                    spec[kx * half + ky] = s.get(b, kx, ky, c);
                }
            }
            plan.inverse_plane(&mut spec, half, &mut plane);
            scatter_plane(&plane, dims, b, c, out.data_mut());
        }
    }
    Ok(out)
}
