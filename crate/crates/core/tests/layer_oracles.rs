mod common;

use std::f64::consts::PI;

use common::{brute_rdft2, max_diff, random_tensor, rng};
use num_complex::Complex64;
use spectralseq_core::fft::hermitian_weight;
use spectralseq_core::layers::{
    fourier_layer, frnn_cell_step, init_hidden, pointwise_linear, rnn_cell_step, spectral_conv, Activation,
    HiddenState, PointwiseWeights, SpectralWeights,
};
use spectralseq_core::{Error, GridCoords, Tensor};

fn random_spectral(cin: usize, cout: usize, m1: usize, m2: usize, seed: u64) -> SpectralWeights {
    let mut r = rng(seed);
    SpectralWeights {
        re: random_tensor(&[2, cin, cout, m1, m2], &mut r),
        im: random_tensor(&[2, cin, cout, m1, m2], &mut r),
    }
}

fn random_pointwise(cin: usize, cout: usize, seed: u64) -> PointwiseWeights {
    let mut r = rng(seed);
    PointwiseWeights { w: random_tensor(&[cin, cout], &mut r), b: Some(random_tensor(&[cout], &mut r)) }
}

fn at(t: &Tensor, b: usize, i: usize, j: usize, c: usize) -> f64 {
    let s = t.shape();
    t.data()[((b * s[1] + i) * s[2] + j) * s[3] + c]
}

/// Weight `R[blk, c, o, r, ky]` for full-axis row `kx`, or `None` outside the band.
fn weight_at(r: &SpectralWeights, c: usize, o: usize, kx: usize, ky: usize, nx: usize) -> Option<Complex64> {
    let (cin, cout) = r.channels();
    let (m1, m2) = r.modes();
    if ky >= m2 {
        return None;
    }
    let (blk, row) = if kx < m1 {
        (0, kx)
    } else if kx >= nx - m1 {
        (1, kx + m1 - nx)
    } else {
        return None;
    };
    let idx = (((blk * cin + c) * cout + o) * m1 + row) * m2 + ky;
    Some(Complex64::new(r.re.data()[idx], r.im.data()[idx]))
}

/// Circular convolution with the complex kernel whose transform is the
/// zero-padded weight block, real part taken.
fn circular_conv_oracle(x: &Tensor, r: &SpectralWeights) -> Tensor {
    let s = x.shape();
    let (batch, nx, ny, cin) = (s[0], s[1], s[2], s[3]);
    let cout = r.channels().1;
    let n = (nx * ny) as f64;
    let mut kernel = vec![Complex64::new(0.0, 0.0); cin * cout * nx * ny];
    for c in 0..cin {
        for o in 0..cout {
            for m in 0..nx {
                for l in 0..ny {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for kx in 0..nx {
                        for ky in 0..ny / 2 + 1 {
                            if let Some(w) = weight_at(r, c, o, kx, ky, nx) {
                                let th = 2.0 * PI * ((kx * m) as f64 / nx as f64 + (ky * l) as f64 / ny as f64);
                                acc += w * hermitian_weight(ky, ny) * Complex64::new(th.cos(), th.sin());
                            }
                        }
                    }
                    kernel[((c * cout + o) * nx + m) * ny + l] = acc / n;
                }
            }
        }
    }
    Tensor::from_fn(&[batch, nx, ny, cout], |k| {
        let o = k % cout;
        let p = k / cout;
        let (b, i, j) = (p / (nx * ny), (p / ny) % nx, p % ny);
        let mut acc = 0.0;
        for c in 0..cin {
            for q1 in 0..nx {
                for q2 in 0..ny {
                    let kv = kernel[((c * cout + o) * nx + (i + nx - q1) % nx) * ny + (j + ny - q2) % ny];
                    acc += (kv * at(x, b, q1, q2, c)).re;
                }
            }
        }
        acc
    })
}

#[test]
fn spectral_conv_equals_circular_convolution_on_8x8() {
    for draw in 0..20u64 {
        let x = random_tensor(&[2, 8, 8, 2], &mut rng(1000 + draw));
        let r = random_spectral(2, 3, 2, 2, 2000 + draw);
        let got = spectral_conv(&x, &r).unwrap();
        let want = circular_conv_oracle(&x, &r);
        assert_eq!(got.shape(), &[2, 8, 8, 3]);
        assert!(got.max_abs_diff(&want) < 1e-8, "draw {draw}: {}", got.max_abs_diff(&want));
    }
}

#[test]
fn identity_weights_pass_band_limited_input() {
    let g = GridCoords::unit(16).unwrap();
    let f = g.sample(|x, y| (2.0 * PI * x).sin() + 0.5 * (2.0 * PI * (2.0 * x - 3.0 * y)).cos() + 0.25);
    let x = f.reshape(&[1, 16, 16, 1]).unwrap();
    let y = spectral_conv(&x, &SpectralWeights::identity(1, 4, 4)).unwrap();
    assert!(y.max_abs_diff(&x) < 1e-8);
}

#[test]
fn identity_weights_low_pass_broadband_input() {
    let (nx, ny, m1, m2) = (12, 12, 3, 4);
    let x = random_tensor(&[1, nx, ny, 1], &mut rng(5));
    let y = spectral_conv(&x, &SpectralWeights::identity(1, m1, m2)).unwrap();
    let half = ny / 2 + 1;
    let mut spec = brute_rdft2(x.data(), nx, ny);
    for kx in 0..nx {
        for ky in 0..half {
            let kept = ky < m2 && (kx < m1 || kx >= nx - m1);
            if !kept {
                spec[kx * half + ky] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let want = common::brute_irdft2(&spec, nx, ny);
    assert!(max_diff(y.data(), &want) < 1e-10);
}

#[test]
fn spectral_conv_is_shift_equivariant() {
    let (nx, ny) = (16, 16);
    let x = random_tensor(&[1, nx, ny, 2], &mut rng(9));
    let r = random_spectral(2, 2, 4, 4, 10);
    let shift = |t: &Tensor| {
        let c = t.shape()[3];
        Tensor::from_fn(t.shape(), |k| {
            let (p, ch) = (k / c, k % c);
            let (i, j) = (p / ny, p % ny);
            t.data()[(((i + nx - 3) % nx) * ny + (j + ny - 5) % ny) * c + ch]
        })
    };
    let a = spectral_conv(&shift(&x), &r).unwrap();
    let b = shift(&spectral_conv(&x, &r).unwrap());
    assert!(a.max_abs_diff(&b) < 1e-8);
}

#[test]
fn spectral_conv_is_resolution_invariant_for_band_limited_input() {
    let f = |x: f64, y: f64| (2.0 * PI * x).cos() * (2.0 * PI * y).sin() + 0.3 * (4.0 * PI * y).cos();
    let r = random_spectral(1, 1, 4, 4, 77);
    let coarse_grid = GridCoords::unit(16).unwrap();
    let fine_grid = GridCoords::unit(32).unwrap();
    let coarse = spectral_conv(&coarse_grid.sample(f).reshape(&[1, 16, 16, 1]).unwrap(), &r).unwrap();
    let fine = spectral_conv(&fine_grid.sample(f).reshape(&[1, 32, 32, 1]).unwrap(), &r).unwrap();
    for i in 0..16 {
        for j in 0..16 {
            assert!((at(&coarse, 0, i, j, 0) - at(&fine, 0, 2 * i, 2 * j, 0)).abs() < 1e-6);
        }
    }
}

#[test]
fn spectral_conv_rejects_bad_modes_and_channels() {
    let x = Tensor::zeros(&[1, 8, 8, 2]);
    assert!(matches!(spectral_conv(&x, &SpectralWeights::zeros(2, 2, 5, 2)), Err(Error::Config(_))));
    assert!(matches!(spectral_conv(&x, &SpectralWeights::zeros(2, 2, 2, 6)), Err(Error::Config(_))));
    assert!(matches!(spectral_conv(&x, &SpectralWeights::zeros(3, 2, 2, 2)), Err(Error::Shape(_))));
    assert!(spectral_conv(&x, &SpectralWeights::zeros(2, 2, 4, 5)).is_ok());
}

#[test]
fn pointwise_examples() {
    let x = random_tensor(&[2, 4, 4, 3], &mut rng(1));
    assert_eq!(pointwise_linear(&x, &PointwiseWeights::identity(3)).unwrap(), x);
    let one = Tensor::new(&[1, 1, 1, 1], vec![3.0]).unwrap();
    let w = PointwiseWeights {
        w: Tensor::new(&[1, 1], vec![2.0]).unwrap(),
        b: Some(Tensor::new(&[1], vec![1.0]).unwrap()),
    };
    assert_eq!(pointwise_linear(&one, &w).unwrap().data(), &[7.0]);
    let w = random_pointwise(3, 2, 4);
    let y = pointwise_linear(&x, &w).unwrap();
    for p in 0..32 {
        for o in 0..2 {
            let mut want = w.b.as_ref().unwrap().data()[o];
            for c in 0..3 {
                want += x.data()[p * 3 + c] * w.w.data()[c * 2 + o];
            }
            assert!((y.data()[p * 2 + o] - want).abs() < 1e-14);
        }
    }
    let bad = PointwiseWeights::zeros(2, 2);
    assert!(pointwise_linear(&x, &bad).is_err());
}

#[test]
fn pointwise_commutes_with_shifts() {
    let x = random_tensor(&[1, 6, 6, 2], &mut rng(12));
    let w = random_pointwise(2, 3, 13);
    let roll = |t: &Tensor| {
        let c = t.shape()[3];
        Tensor::from_fn(t.shape(), |k| t.data()[(k + 7 * c) % t.len()])
    };
    let a = pointwise_linear(&roll(&x), &w).unwrap();
    let b = roll(&pointwise_linear(&x, &w).unwrap());
    assert!(a.max_abs_diff(&b) < 1e-14);
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Tanh => v.tanh(),
        Activation::Identity => v,
    }
}

/// Straight-line evaluation of the spectral term using direct sums.
fn spectral_term(x: &Tensor, r: &SpectralWeights, b: usize, o: usize, i: usize, j: usize) -> f64 {
    let s = x.shape();
    let (nx, ny, cin) = (s[1], s[2], s[3]);
    let mut acc = 0.0;
    for kx in 0..nx {
        for ky in 0..ny / 2 + 1 {
            let mut y_hat = Complex64::new(0.0, 0.0);
            for c in 0..cin {
                let Some(w) = weight_at(r, c, o, kx, ky, nx) else { continue };
                let mut x_hat = Complex64::new(0.0, 0.0);
                for p in 0..nx {
                    for q in 0..ny {
                        let th = -2.0 * PI * ((kx * p) as f64 / nx as f64 + (ky * q) as f64 / ny as f64);
                        x_hat += at(x, b, p, q, c) * Complex64::new(th.cos(), th.sin());
                    }
                }
                y_hat += w * x_hat;
            }
            let th = 2.0 * PI * ((kx * i) as f64 / nx as f64 + (ky * j) as f64 / ny as f64);
            acc += hermitian_weight(ky, ny) * (y_hat * Complex64::new(th.cos(), th.sin())).re;
        }
    }
    acc / (nx * ny) as f64
}

fn affine_term(x: &Tensor, w: &PointwiseWeights, b: usize, o: usize, i: usize, j: usize) -> f64 {
    let cin = x.shape()[3];
    let cout = w.w.shape()[1];
    let mut acc = w.b.as_ref().map_or(0.0, |b| b.data()[o]);
    for c in 0..cin {
        acc += at(x, b, i, j, c) * w.w.data()[c * cout + o];
    }
    acc
}

#[test]
fn fourier_layer_matches_scalar_reimplementation() {
    for seed in 0..3 {
        let x = random_tensor(&[1, 6, 8, 2], &mut rng(seed));
        let r = random_spectral(2, 3, 2, 3, 50 + seed);
        let w = random_pointwise(2, 3, 60 + seed);
        for a in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            let y = fourier_layer(&x, &r, &w, a).unwrap();
            for i in 0..6 {
                for j in 0..8 {
                    for o in 0..3 {
                        let want = act(a, spectral_term(&x, &r, 0, o, i, j) + affine_term(&x, &w, 0, o, i, j));
                        assert!((at(&y, 0, i, j, o) - want).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn fourier_layer_degenerate_weights() {
    let x = random_tensor(&[2, 8, 8, 3], &mut rng(21));
    let zero_r = SpectralWeights::zeros(3, 3, 2, 2);
    let y = fourier_layer(&x, &zero_r, &PointwiseWeights::identity(3), Activation::Identity).unwrap();
    assert_eq!(y, x);
    let y = fourier_layer(&x, &zero_r, &PointwiseWeights::zeros(3, 3), Activation::Relu).unwrap();
    assert_eq!(y.max_abs(), 0.0);
}

#[test]
fn rnn_cell_examples() {
    let x = random_tensor(&[1, 4, 4, 2], &mut rng(31));
    let h0 = HiddenState(random_tensor(&[1, 4, 4, 2], &mut rng(32)));
    let (_, y) =
        rnn_cell_step(&x, &h0, &PointwiseWeights::identity(2), &PointwiseWeights::zeros(2, 2), Activation::Tanh)
            .unwrap();
    assert!(y.max_abs_diff(&x.map(f64::tanh)) < 1e-15);
    let (h, _) =
        rnn_cell_step(&x, &h0, &PointwiseWeights::zeros(2, 2), &PointwiseWeights::identity(2), Activation::Relu)
            .unwrap();
    assert_eq!(h, h0);

    let scalar = |v: f64| PointwiseWeights { w: Tensor::new(&[1, 1], vec![v]).unwrap(), b: None };
    let mut h = HiddenState(Tensor::zeros(&[1, 1, 1, 1]));
    let mut ys = Vec::new();
    for xv in [1.0, 0.0, 0.0] {
        let xt = Tensor::new(&[1, 1, 1, 1], vec![xv]).unwrap();
        let (hn, y) = rnn_cell_step(&xt, &h, &scalar(1.0), &scalar(0.5), Activation::Identity).unwrap();
        ys.push(y.item());
        h = hn;
    }
    assert_eq!(ys, vec![1.0, 0.5, 0.25]);
}

#[test]
fn rnn_cell_feeds_pre_activation_forward() {
    let scalar = |v: f64| PointwiseWeights { w: Tensor::new(&[1, 1], vec![v]).unwrap(), b: None };
    let x = Tensor::new(&[1, 1, 1, 1], vec![-2.0]).unwrap();
    let h0 = HiddenState(Tensor::zeros(&[1, 1, 1, 1]));
    let (h, y) = rnn_cell_step(&x, &h0, &scalar(1.0), &scalar(1.0), Activation::Relu).unwrap();
    assert_eq!(h.0.item(), -2.0);
    assert_eq!(y.item(), 0.0);
}

#[test]
fn rnn_cell_rejects_hidden_mismatch() {
    let x = Tensor::zeros(&[1, 4, 4, 2]);
    let h0 = HiddenState(Tensor::zeros(&[1, 4, 4, 3]));
    let r = rnn_cell_step(&x, &h0, &PointwiseWeights::zeros(2, 2), &PointwiseWeights::zeros(2, 2), Activation::Tanh);
    assert!(matches!(r, Err(Error::Shape(_))));
    let h_bad = HiddenState(Tensor::zeros(&[1, 2, 4, 2]));
    let r = frnn_cell_step(
        &x,
        &h_bad,
        &SpectralWeights::zeros(2, 2, 1, 1),
        &SpectralWeights::zeros(2, 2, 1, 1),
        &PointwiseWeights::zeros(2, 2),
        &PointwiseWeights::zeros(2, 2),
        Activation::Tanh,
    );
    assert!(r.is_err());
}

#[test]
fn frnn_cell_degenerates_to_rnn_cell() {
    let x = random_tensor(&[2, 8, 8, 3], &mut rng(40));
    let h0 = HiddenState(random_tensor(&[2, 8, 8, 3], &mut rng(41)));
    let (wx, wh) = (random_pointwise(3, 3, 42), random_pointwise(3, 3, 43));
    let z = SpectralWeights::zeros(3, 3, 2, 2);
    let (h1, y1) = frnn_cell_step(&x, &h0, &z, &z, &wx, &wh, Activation::Tanh).unwrap();
    let (h2, y2) = rnn_cell_step(&x, &h0, &wx, &wh, Activation::Tanh).unwrap();
    assert!(h1.0.max_abs_diff(&h2.0) < 1e-15);
    assert!(y1.max_abs_diff(&y2) < 1e-15);
}

#[test]
fn frnn_cell_without_memory_is_a_spectral_layer() {
    let x = random_tensor(&[1, 8, 8, 2], &mut rng(44));
    let rx = random_spectral(2, 2, 2, 3, 45);
    let zs = SpectralWeights::zeros(2, 2, 2, 3);
    let zp = PointwiseWeights { w: Tensor::zeros(&[2, 2]), b: None };
    let want = spectral_conv(&x, &rx).unwrap().map(f64::tanh);
    for seed in [46, 47] {
        let h0 = HiddenState(random_tensor(&[1, 8, 8, 2], &mut rng(seed)));
        let (_, y) = frnn_cell_step(&x, &h0, &rx, &zs, &zp, &zp, Activation::Tanh).unwrap();
        assert!(y.max_abs_diff(&want) < 1e-12);
    }
}

#[test]
fn frnn_cell_two_steps_match_scalar_reimplementation() {
    let (nx, ny, ch) = (6, 6, 2);
    let xs = [random_tensor(&[1, nx, ny, ch], &mut rng(70)), random_tensor(&[1, nx, ny, ch], &mut rng(71))];
    let h0 = HiddenState(random_tensor(&[1, nx, ny, ch], &mut rng(72)));
    let (rx, rh) = (random_spectral(ch, ch, 2, 2, 73), random_spectral(ch, ch, 2, 2, 74));
    let (wx, wh) = (random_pointwise(ch, ch, 75), random_pointwise(ch, ch, 76));
    let mut h = h0.clone();
    let mut h_ref = h0.0.clone();
    for x in &xs {
        let (hn, y) = frnn_cell_step(x, &h, &rx, &rh, &wx, &wh, Activation::Tanh).unwrap();
        let next = Tensor::from_fn(&[1, nx, ny, ch], |k| {
            let (o, p) = (k % ch, k / ch);
            let (i, j) = (p / ny, p % ny);
            spectral_term(x, &rx, 0, o, i, j)
                + affine_term(x, &wx, 0, o, i, j)
                + spectral_term(&h_ref, &rh, 0, o, i, j)
                + affine_term(&h_ref, &wh, 0, o, i, j)
        });
        assert!(hn.0.max_abs_diff(&next) < 1e-10);
        assert!(y.max_abs_diff(&next.map(f64::tanh)) < 1e-10);
        h = hn;
        h_ref = next;
    }
}

#[test]
fn init_hidden_layout() {
    let g = GridCoords::wave(4).unwrap();
    let window = random_tensor(&[2, 4, 4, 3], &mut rng(80));
    let h = init_hidden(&window, 3, &g).unwrap().0;
    assert_eq!(h.shape(), &[2, 4, 4, 3]);
    let h5 = init_hidden(&window, 5, &g).unwrap().0;
    for b in 0..2 {
        for i in 0..4 {
            for j in 0..4 {
                let f0 = at(&window, b, i, j, 0);
                assert_eq!(at(&h, b, i, j, 0), f0);
                for c in 0..3 {
                    assert_eq!(at(&h5, b, i, j, c), f0);
                }
                let (x, y) = (-1.0 + 2.0 * i as f64 / 3.0, -1.0 + 2.0 * j as f64 / 3.0);
                assert!((at(&h5, b, i, j, 3) - x).abs() < 1e-15);
                assert!((at(&h5, b, i, j, 4) - y).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn init_hidden_zero_frame_and_coordinate_span() {
    let g = GridCoords::wave(8).unwrap();
    let h = init_hidden(&Tensor::zeros(&[1, 8, 8, 2]), 4, &g).unwrap().0;
    let chan = |c: usize| (0..64).map(|p| h.data()[p * 4 + c]).collect::<Vec<_>>();
    assert!(chan(0).iter().chain(&chan(1)).all(|&v| v == 0.0));
    for c in [2, 3] {
        let v = chan(c);
        assert_eq!(v.iter().cloned().fold(f64::INFINITY, f64::min), -1.0);
        assert_eq!(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }
}

#[test]
fn init_hidden_errors() {
    let g = GridCoords::wave(4).unwrap();
    let w = Tensor::zeros(&[1, 4, 4, 2]);
    assert!(matches!(init_hidden(&w, 2, &g), Err(Error::Config(_))));
    assert!(matches!(init_hidden(&Tensor::zeros(&[1, 5, 4, 2]), 4, &g), Err(Error::Shape(_))));
    assert!(matches!(init_hidden(&Tensor::zeros(&[4, 4, 2]), 4, &g), Err(Error::Shape(_))));
}
