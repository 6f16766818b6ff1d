//! Truncated-mode spectral convolution kernels (forward and adjoint).
//!
//! Weights are stored as two real tensors `re`, `im` of shape
//! `(2, in, out, m1, m2)`. Block 0 acts on the rows `kx in [0, m1)`, block 1 on
//! `kx in [nx - m1, nx)`. Columns `ky in [0, m2)` of the half spectrum are kept.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{config_err, shape_err, Result};
use crate::fft::{field_dims, gather_plane, hermitian_weight, scatter_plane, Fft2Plan};
use crate::tensor::Tensor;

pub(crate) fn check_modes(nx: usize, ny: usize, m1: usize, m2: usize) -> Result<()> {
    if m1 == 0 || m2 == 0 {
        return Err(config_err!("mode counts must be positive, got ({m1}, {m2})"));
    }
    if 2 * m1 > nx || m2 > ny / 2 + 1 {
        return Err(config_err!("modes ({m1}, {m2}) exceed the Nyquist limit of a {nx}x{ny} grid"));
    }
    Ok(())
}

/// Weight shape check; returns `(in, out, m1, m2)`.
pub(crate) fn weight_dims(re: &Tensor, im: &Tensor) -> Result<(usize, usize, usize, usize)> {
    if re.shape() != im.shape() {
        return Err(shape_err!("spectral re/im shapes differ: {:?} vs {:?}", re.shape(), im.shape()));
    }
    match *re.shape() {
        [2, ci, co, m1, m2] => Ok((ci, co, m1, m2)),
        ref s => Err(shape_err!("spectral weights must be (2, in, out, m1, m2), got {:?}", s)),
    }
}

#[inline]
fn row_of(r: usize, m1: usize, nx: usize) -> usize {
    if r < m1 {
        r
    } else {
        nx - 2 * m1 + r
    }
}

/// Saved forward state: the retained modes of the input, `(batch, in, 2*m1, m2)`.
#[derive(Debug, Clone)]
pub(crate) struct SavedModes {
    pub modes: Vec<Complex64>,
}

pub(crate) fn forward(x: &Tensor, re: &Tensor, im: &Tensor) -> Result<(Tensor, SavedModes)> {
    let dims @ [batch, nx, ny, cin] = field_dims(x)?;
    let (wi, co, m1, m2) = weight_dims(re, im)?;
    if wi != cin {
        return Err(shape_err!("input has {cin} channels, spectral weights expect {wi}"));
    }
    check_modes(nx, ny, m1, m2)?;
    let rows = 2 * m1;
    let per = rows * m2;
    let mut plan = Fft2Plan::new(nx, ny);
    let mut plane = vec![0.0; nx * ny];
    let mut spec = vec![Complex64::new(0.0, 0.0); nx * m2];
    let mut xhat = vec![Complex64::new(0.0, 0.0); batch * cin * per];
    for b in 0..batch {
        for c in 0..cin {
            gather_plane(x.data(), dims, b, c, &mut plane);
            plan.forward_plane(&plane, m2, &mut spec);
            let dst = &mut xhat[(b * cin + c) * per..(b * cin + c + 1) * per];
            for r in 0..rows {
                let kx = row_of(r, m1, nx);
                dst[r * m2..(r + 1) * m2].copy_from_slice(&spec[kx * m2..(kx + 1) * m2]);
            }
        }
    }

    let out_dims = [batch, nx, ny, co];
    let mut y = Tensor::zeros(&out_dims);
    let mut yhat = vec![Complex64::new(0.0, 0.0); per];
    let (wr, wim) = (re.data(), im.data());
    for b in 0..batch {
        for o in 0..co {
            yhat.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for c in 0..cin {
                let xm = &xhat[(b * cin + c) * per..(b * cin + c + 1) * per];
                for r in 0..rows {
                    let blk = r / m1;
                    let rr = r % m1;
                    let wbase = (((blk * cin + c) * co + o) * m1 + rr) * m2;
                    for ky in 0..m2 {
                        let w = Complex64::new(wr[wbase + ky], wim[wbase + ky]);
                        yhat[r * m2 + ky] += xm[r * m2 + ky] * w;
                    }
                }
            }
            spec.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for r in 0..rows {
                let kx = row_of(r, m1, nx);
                spec[kx * m2..(kx + 1) * m2].copy_from_slice(&yhat[r * m2..(r + 1) * m2]);
            }
            plan.inverse_plane(&mut spec, m2, &mut plane);
            scatter_plane(&plane, out_dims, b, o, y.data_mut());
        }
    }
    Ok((y, SavedModes { modes: xhat }))
}

/// Adjoint of [`forward`]: returns `(d x, d re, d im)` for output cotangent `gy`.
pub(crate) fn backward(gy: &Tensor, saved: &SavedModes, re: &Tensor, im: &Tensor) -> (Tensor, Tensor, Tensor) {
    let gdims @ [batch, nx, ny, co] = field_dims(gy).expect("cotangent shape");
    let (cin, _, m1, m2) = weight_dims(re, im).expect("weight shape");
    let rows = 2 * m1;
    let per = rows * m2;
    let n = (nx * ny) as f64;
    let mut plan = Fft2Plan::new(nx, ny);
    let mut plane = vec![0.0; nx * ny];
    let mut spec = vec![Complex64::new(0.0, 0.0); nx * m2];

    // (w / N) * rfft2(gy) on the retained modes
    let mut ghat = vec![Complex64::new(0.0, 0.0); batch * co * per];
    for b in 0..batch {
        for o in 0..co {
            gather_plane(gy.data(), gdims, b, o, &mut plane);
            plan.forward_plane(&plane, m2, &mut spec);
            let dst = &mut ghat[(b * co + o) * per..(b * co + o + 1) * per];
            for r in 0..rows {
                let kx = row_of(r, m1, nx);
                for ky in 0..m2 {
                    dst[r * m2 + ky] = spec[kx * m2 + ky] * (hermitian_weight(ky, ny) / n);
                }
            }
        }
    }

    let mut gre = Tensor::zeros(re.shape());
    let mut gim = Tensor::zeros(im.shape());
    let (wr, wim) = (re.data(), im.data());
    let xin_dims = [batch, nx, ny, cin];
    let mut gx = Tensor::zeros(&xin_dims);
    let mut gxhat = vec![Complex64::new(0.0, 0.0); per];
    for b in 0..batch {
        for c in 0..cin {
            let xm = &saved.modes[(b * cin + c) * per..(b * cin + c + 1) * per];
            gxhat.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for o in 0..co {
                let gm = &ghat[(b * co + o) * per..(b * co + o + 1) * per];
                for r in 0..rows {
                    let blk = r / m1;
                    let rr = r % m1;
                    let wbase = (((blk * cin + c) * co + o) * m1 + rr) * m2;
                    for ky in 0..m2 {
                        let g = gm[r * m2 + ky];
                        let dw = xm[r * m2 + ky].conj() * g;
                        gre.data_mut()[wbase + ky] += dw.re;
                        gim.data_mut()[wbase + ky] += dw.im;
                        let w = Complex64::new(wr[wbase + ky], wim[wbase + ky]);
                        gxhat[r * m2 + ky] += w.conj() * g;
                    }
                }
            }
            // gx = Re sum_k gxhat_k e^{i theta} = N * irfft2(gxhat / w)
            spec.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for r in 0..rows {
                let kx = row_of(r, m1, nx);
                for ky in 0..m2 {
                    spec[kx * m2 + ky] = gxhat[r * m2 + ky] * (n / hermitian_weight(ky, ny));
                }
            }
            plan.inverse_plane(&mut spec, m2, &mut plane);
            scatter_plane(&plane, xin_dims, b, c, gx.data_mut());
        }
    }
    (gx, gre, gim)
}
