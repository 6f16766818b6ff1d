//! Strided 2-D convolution and its transpose on `(batch, h, w, channels)` grids.
//!
//! Both kernels share one tap relation between a "small" grid index `(i, j)`
//! and a "large" grid index `(i * stride - pad + ki, j * stride - pad + kj)`.
//! A convolution reads the large grid and writes the small one; the transpose
//! does the opposite. Weights are `(k, k, in, out)`.

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Extra rows/columns appended to a transposed convolution's output.
    pub output_pad: usize,
}

impl ConvGeometry {
    pub fn conv_out(&self, n: usize) -> usize {
        (n + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn transpose_out(&self, n: usize) -> usize {
        (n - 1) * self.stride + self.kernel + self.output_pad - 2 * self.pad
    }
}

fn weight_dims(w: &Tensor, g: &ConvGeometry) -> Result<(usize, usize)> {
    match *w.shape() {
        [k1, k2, ci, co] if k1 == g.kernel && k2 == g.kernel => Ok((ci, co)),
        ref s => Err(shape_err!("conv weight must be ({0}, {0}, in, out), got {1:?}", g.kernel, s)),
    }
}

fn dims4(x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        ref s => Err(shape_err!("expected a rank-4 grid tensor, got {:?}", s)),
    }
}

#[inline]
fn taps(small: (usize, usize), large: (usize, usize), g: &ConvGeometry, mut f: impl FnMut(usize, usize, usize)) {
    for si in 0..small.0 {
        for sj in 0..small.1 {
            let s_idx = si * small.1 + sj;
            for ki in 0..g.kernel {
                let li = (si * g.stride + ki) as isize - g.pad as isize;
                if li < 0 || li as usize >= large.0 {
                    continue;
                }
                for kj in 0..g.kernel {
                    let lj = (sj * g.stride + kj) as isize - g.pad as isize;
                    if lj < 0 || lj as usize >= large.1 {
                        continue;
                    }
                    let l_idx = li as usize * large.1 + lj as usize;
                    f(s_idx, l_idx, ki * g.kernel + kj);
                }
            }
        }
    }
}

fn add_bias(y: &mut Tensor, bias: Option<&Tensor>) {
    if let Some(b) = bias {
        let co = b.len();
        for row in y.data_mut().chunks_mut(co) {
            for (v, bb) in row.iter_mut().zip(b.data()) {
                *v += bb;
            }
        }
    }
}

fn bias_grad(gy: &Tensor, co: usize) -> Tensor {
    let mut gb = Tensor::zeros(&[co]);
    for row in gy.data().chunks(co) {
        for (g, v) in gb.data_mut().iter_mut().zip(row) {
            *g += v;
        }
    }
    gb
}

pub(crate) fn conv2d_forward(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, g: &ConvGeometry) -> Result<Tensor> {
    let [batch, h, wd, ci] = dims4(x)?;
    let (wci, co) = weight_dims(w, g)?;
    if wci != ci {
        return Err(shape_err!("conv expects {wci} input channels, got {ci}"));
    }
    let (oh, ow) = (g.conv_out(h), g.conv_out(wd));
    let mut y = Tensor::zeros(&[batch, oh, ow, co]);
    let (xd, wdat) = (x.data(), w.data());
    for b in 0..batch {
        let xb = &xd[b * h * wd * ci..(b + 1) * h * wd * ci];
        let yb = &mut y.data_mut()[b * oh * ow * co..(b + 1) * oh * ow * co];
        taps((oh, ow), (h, wd), g, |s, l, k| {
            let out = &mut yb[s * co..(s + 1) * co];
            for c in 0..ci {
                let xv = xb[l * ci + c];
                let wrow = &wdat[(k * ci + c) * co..(k * ci + c + 1) * co];
                for (o, wv) in out.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        });
    }
    add_bias(&mut y, bias);
    Ok(y)
}

pub(crate) fn conv2d_backward(gy: &Tensor, x: &Tensor, w: &Tensor, g: &ConvGeometry) -> (Tensor, Tensor, Tensor) {
    let [batch, h, wd, ci] = dims4(x).expect("conv input");
    let [_, oh, ow, co] = dims4(gy).expect("conv cotangent");
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let (xd, wdat, gyd) = (x.data(), w.data(), gy.data());
    for b in 0..batch {
        let xb = &xd[b * h * wd * ci..(b + 1) * h * wd * ci];
        let gyb = &gyd[b * oh * ow * co..(b + 1) * oh * ow * co];
        let gxb = &mut gx.data_mut()[b * h * wd * ci..(b + 1) * h * wd * ci];
        let gwd = gw.data_mut();
        taps((oh, ow), (h, wd), g, |s, l, k| {
            let grow = &gyb[s * co..(s + 1) * co];
            for c in 0..ci {
                let xv = xb[l * ci + c];
                let base = (k * ci + c) * co;
                let mut acc = 0.0;
                for o in 0..co {
                    acc += grow[o] * wdat[base + o];
                    gwd[base + o] += xv * grow[o];
                }
                gxb[l * ci + c] += acc;
            }
        });
    }
    (gx, gw, bias_grad(gy, co))
}

pub(crate) fn conv_transpose2d_forward(
    x: &Tensor,
    w: &Tensor,
    bias: Option<&Tensor>,
    g: &ConvGeometry,
) -> Result<Tensor> {
    let [batch, h, wd, ci] = dims4(x)?;
    let (wci, co) = weight_dims(w, g)?;
    if wci != ci {
        return Err(shape_err!("transposed conv expects {wci} input channels, got {ci}"));
    }
    let (oh, ow) = (g.transpose_out(h), g.transpose_out(wd));
    let mut y = Tensor::zeros(&[batch, oh, ow, co]);
    let (xd, wdat) = (x.data(), w.data());
    for b in 0..batch {
        let xb = &xd[b * h * wd * ci..(b + 1) * h * wd * ci];
        let yb = &mut y.data_mut()[b * oh * ow * co..(b + 1) * oh * ow * co];
        taps((h, wd), (oh, ow), g, |s, l, k| {
            let out = &mut yb[l * co..(l + 1) * co];
            for c in 0..ci {
                let xv = xb[s * ci + c];
                let wrow = &wdat[(k * ci + c) * co..(k * ci + c + 1) * co];
                for (o, wv) in out.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        });
    }
    add_bias(&mut y, bias);
    Ok(y)
}

pub(crate) fn conv_transpose2d_backward(
    gy: &Tensor,
    x: &Tensor,
    w: &Tensor,
    g: &ConvGeometry,
) -> (Tensor, Tensor, Tensor) {
    let [batch, h, wd, ci] = dims4(x).expect("conv input");
    let [_, oh, ow, co] = dims4(gy).expect("conv cotangent");
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let (xd, wdat, gyd) = (x.data(), w.data(), gy.data());
    for b in 0..batch {
        let xb = &xd[b * h * wd * ci..(b + 1) * h * wd * ci];
        let gyb = &gyd[b * oh * ow * co..(b + 1) * oh * ow * co];
        let gxb = &mut gx.data_mut()[b * h * wd * ci..(b + 1) * h * wd * ci];
        let gwd = gw.data_mut();
        taps((h, wd), (oh, ow), g, |s, l, k| {
            let grow = &gyb[l * co..(l + 1) * co];
            for c in 0..ci {
                let xv = xb[s * ci + c];
                let base = (k * ci + c) * co;
                let mut acc = 0.0;
                for o in 0..co {
                    acc += grow[o] * wdat[base + o];
                    gwd[base + o] += xv * grow[o];
                }
                gxb[s * ci + c] += acc;
            }
        });
    }
    (gx, gw, bias_grad(gy, co))
}
