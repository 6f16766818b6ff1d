mod common;

use common::{random_tensor, rng};
use spectralseq_core::autodiff::{ParamStore, Tape, Var};
use spectralseq_core::models::{
    count_params, rollout, rollout_on, rollout_tensor, Arch, Model, ModelConfig, RolloutKind, SequenceModel,
};
use spectralseq_core::training::{batch_loss_and_grad, LossMode};
use spectralseq_core::{Error, GridCoords, Result, Tensor};

fn within(count: usize, target: usize, rel: f64) -> bool {
    (count as f64 - target as f64).abs() / target as f64 <= rel
}

fn grid64() -> GridCoords {
    GridCoords::unit(64).unwrap()
}

#[test]
fn reference_parameter_counts() {
    let fno20 = count_params(&Model::build(&ModelConfig::reference(Arch::Fno2d, grid64(), 20, 30)).unwrap());
    let fno10 = count_params(&Model::build(&ModelConfig::reference(Arch::Fno2d, grid64(), 10, 10)).unwrap());
    let frnn20 = count_params(&Model::build(&ModelConfig::reference(Arch::Frnn, grid64(), 20, 30)).unwrap());
    let frnn10 = count_params(&Model::build(&ModelConfig::reference(Arch::Frnn, grid64(), 10, 10)).unwrap());
    assert!(within(fno20, 4_203_873, 1e-3), "{fno20}");
    assert!(within(fno10, 4_203_553, 1e-3), "{fno10}");
    assert!(within(frnn20, 4_201_665, 1e-3), "{frnn20}");
    assert!(within(frnn10, 4_201_345, 1e-3), "{frnn10}");
    assert_eq!(fno20 - fno10, 320);
    for n in [32, 64] {
        let c = count_params(
            &Model::build(&ModelConfig::reference(Arch::Crnn, GridCoords::unit(n).unwrap(), 20, 30)).unwrap(),
        );
        assert!((1_000_000..=1_700_000).contains(&c), "{n}: {c}");
    }
}

#[test]
#[allow(clippy::identity_op)]
fn tiny_fno_count_matches_hand_formula() {
    let grid = GridCoords::unit(8).unwrap();
    let cfg = ModelConfig::reference(Arch::Fno2d, grid, 1, 1).with_size(2, 1);
    let lifting = 3 * 2 + 2;
    let layer = 2 * 2 * 2 * 1 * 2 + 2 * 2 + 2;
    let projection = 2 * 128 + 128 + 128 + 1;
    assert_eq!(count_params(&Model::build(&cfg).unwrap()), lifting + 4 * layer + projection);
    assert_eq!(lifting + 4 * layer + projection, 609);
    assert_eq!(ParamStore::new().num_scalars(), 0);
}

#[test]
fn recurrent_count_matches_hand_formula() {
    let grid = GridCoords::unit(8).unwrap();
    let (w, m) = (4, 2);
    let cfg = ModelConfig::reference(Arch::Frnn, grid, 3, 2).with_size(w, m);
    let cell = 2 * (2 * w * w * m * m * 2) + 2 * (w * w + w);
    assert_eq!(count_params(&Model::build(&cfg).unwrap()), (3 * w + w) + 2 * cell + (w + 1));
    let rnn = ModelConfig { arch: Arch::Rnn, ..cfg };
    assert_eq!(count_params(&Model::build(&rnn).unwrap()), (3 * w + w) + 2 * 2 * (w * w + w) + (w + 1));
}

#[test]
fn config_validation() {
    let grid = GridCoords::unit(8).unwrap();
    let base = ModelConfig::reference(Arch::Fno2d, grid, 2, 2).with_size(4, 2);
    assert!(Model::build(&base).is_ok());
    for bad in [
        ModelConfig { step: 2, ..base.clone() },
        ModelConfig { t_in: 0, ..base.clone() },
        ModelConfig { t_out: 0, ..base.clone() },
        ModelConfig { modes: (5, 2), ..base.clone() },
        ModelConfig { width: 0, ..base.clone() },
        ModelConfig { arch: Arch::Frnn, width: 2, ..base.clone() },
        ModelConfig { arch: Arch::Crnn, grid: GridCoords::unit(6).unwrap(), ..base.clone() },
    ] {
        assert!(matches!(Model::build(&bad), Err(Error::Config(_))), "{bad:?}");
    }
    assert!(spectralseq_core::models::build_frnn(&base).is_err());
}

/// Returns the newest frame of the window unchanged.
struct LastFrame(usize);

impl SequenceModel for LastFrame {
    type State = ();
    fn kind(&self) -> RolloutKind {
        RolloutKind::Window
    }
    fn t_in(&self) -> usize {
        self.0
    }
    fn start(&self, _: &mut Tape<'_>, _: Var) -> Result<()> {
        Ok(())
    }
    fn step(&self, tape: &mut Tape<'_>, _: &mut (), input: Var) -> Result<Var> {
        tape.narrow(input, self.0 - 1, 1)
    }
}

/// Recurrent stub emitting `frame + 1`.
struct PlusOne(usize);

impl SequenceModel for PlusOne {
    type State = ();
    fn kind(&self) -> RolloutKind {
        RolloutKind::Recurrent
    }
    fn t_in(&self) -> usize {
        self.0
    }
    fn start(&self, _: &mut Tape<'_>, _: Var) -> Result<()> {
        Ok(())
    }
    fn step(&self, tape: &mut Tape<'_>, _: &mut (), input: Var) -> Result<Var> {
        Ok(tape.offset(input, 1.0))
    }
}

#[test]
fn identity_stub_repeats_last_frame() {
    let window = random_tensor(&[2, 3, 3, 4], &mut rng(1));
    let mut tape = Tape::new();
    let out = rollout_tensor(&LastFrame(4), &mut tape, &window, 5).unwrap();
    assert_eq!(out.shape(), &[2, 3, 3, 5]);
    for p in 0..18 {
        for k in 0..5 {
            assert_eq!(out.data()[p * 5 + k], window.data()[p * 4 + 3]);
        }
    }
}

#[test]
fn plus_one_stub_counts_up() {
    let window = Tensor::new(&[1, 1, 1, 3], vec![0.0, 0.0, 10.0]).unwrap();
    let mut tape = Tape::new();
    let out = rollout_tensor(&PlusOne(3), &mut tape, &window, 4).unwrap();
    assert_eq!(out.data(), &[11.0, 12.0, 13.0, 14.0]);
    let mut tape = Tape::new();
    assert!(matches!(rollout_tensor(&PlusOne(2), &mut tape, &window, 4), Err(Error::Shape(_))));
}

fn small(arch: Arch, t_in: usize, t_out: usize, seed: u64) -> Model {
    let grid = GridCoords::wave(16).unwrap();
    let mut cfg = ModelConfig::reference(arch, grid, t_in, t_out).with_size(6, 3).with_seed(seed);
    cfg.projection = 8;
    cfg.crnn_hidden = 12;
    cfg.crnn_channels = vec![2, 3];
    cfg.crnn_kernel = 3;
    cfg.depth = if arch == Arch::Crnn { 2 } else { cfg.depth };
    Model::build(&cfg).unwrap()
}

#[test]
fn rollout_emits_t_out_frames_for_every_arch() {
    for arch in [Arch::Fno2d, Arch::Frnn, Arch::Crnn, Arch::Rnn] {
        let m = small(arch, 3, 4, 0);
        let w = random_tensor(&[2, 16, 16, 3], &mut rng(2));
        let out = rollout(&m, &w, 4).unwrap();
        assert_eq!(out.shape(), &[2, 16, 16, 4], "{arch:?}");
        assert!(out.is_finite());
        assert!(matches!(rollout(&m, &random_tensor(&[2, 16, 16, 2], &mut rng(2)), 4), Err(Error::Shape(_))));
        assert_eq!(rollout(&m, &w, 4).unwrap(), out, "{arch:?} not deterministic");
    }
}

#[test]
fn fno_rollout_equals_manual_shifted_calls() {
    let m = small(Arch::Fno2d, 3, 2, 5);
    let w = random_tensor(&[1, 16, 16, 3], &mut rng(6));
    let out = rollout(&m, &w, 2).unwrap();
    let first = rollout(&m, &w, 1).unwrap();
    let shifted = Tensor::concat_last(&[&w.narrow_last(1, 2).unwrap(), &first]).unwrap();
    let second = rollout(&m, &shifted, 1).unwrap();
    assert!(out.narrow_last(0, 1).unwrap().max_abs_diff(&first) == 0.0);
    assert!(out.narrow_last(1, 1).unwrap().max_abs_diff(&second) < 1e-12);
}

/// Teacher-forced predictions for a window and the frames after it.
fn teacher_forced(m: &Model, window: &Tensor, truth: &Tensor) -> Vec<Tensor> {
    let mut tape = Tape::with_params(&m.params);
    let w = tape.leaf(window.clone());
    let t = tape.leaf(truth.clone());
    let preds = rollout_on(m, &mut tape, w, truth.shape()[3], Some(t)).unwrap();
    preds.iter().map(|&p| tape.value(p).clone()).collect()
}

fn perturb_first_frame(window: &Tensor) -> Tensor {
    let t = window.shape()[3];
    let mut w = window.clone();
    for (i, v) in w.data_mut().iter_mut().enumerate() {
        if i % t == 0 {
            *v += 0.5;
        }
    }
    w
}

#[test]
fn fno_predictions_forget_frames_outside_the_window() {
    let m = small(Arch::Fno2d, 3, 6, 7);
    let window = random_tensor(&[1, 16, 16, 3], &mut rng(8));
    let truth = random_tensor(&[1, 16, 16, 6], &mut rng(9));
    let a = teacher_forced(&m, &window, &truth);
    let b = teacher_forced(&m, &perturb_first_frame(&window), &truth);
    assert!(a[0].max_abs_diff(&b[0]) > 1e-6);
    for k in 1..6 {
        assert_eq!(a[k], b[k], "step {k} still sees the perturbed frame");
    }
}

#[test]
fn frnn_predictions_remember_old_frames() {
    let m = small(Arch::Frnn, 3, 6, 10);
    let window = random_tensor(&[1, 16, 16, 3], &mut rng(11));
    let truth = random_tensor(&[1, 16, 16, 6], &mut rng(12));
    let a = teacher_forced(&m, &window, &truth);
    let b = teacher_forced(&m, &perturb_first_frame(&window), &truth);
    for k in 0..6 {
        assert!(a[k].max_abs_diff(&b[k]) > 1e-9, "step {k} forgot frame 0");
    }
}

fn zero_biases(m: &mut Model) {
    let ids: Vec<_> = m.params.iter().filter(|(_, p)| p.name.ends_with(".b")).map(|(id, _)| id).collect();
    for id in ids {
        m.params.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn crnn_zero_input_with_zero_biases_gives_zero_output() {
    let mut m = small(Arch::Crnn, 2, 3, 13);
    zero_biases(&mut m);
    let out = rollout(&m, &Tensor::zeros(&[2, 16, 16, 2]), 3).unwrap();
    assert_eq!(out.max_abs(), 0.0);
}

#[test]
fn crnn_hidden_state_moves_only_for_nonzero_input() {
    let mut m = small(Arch::Crnn, 1, 1, 14);
    zero_biases(&mut m);
    for (input, moves) in
        [(Tensor::zeros(&[1, 16, 16, 1]), false), (random_tensor(&[1, 16, 16, 1], &mut rng(15)), true)]
    {
        let mut tape = Tape::with_params(&m.params);
        let w = tape.leaf(input.clone());
        let mut state = m.start(&mut tape, w).unwrap();
        let before: Vec<Tensor> = state.hidden().iter().map(|&h| tape.value(h).clone()).collect();
        m.step(&mut tape, &mut state, w).unwrap();
        let after: Vec<Tensor> = state.hidden().iter().map(|&h| tape.value(h).clone()).collect();
        for (b, a) in before.iter().zip(&after) {
            assert_eq!(a.max_abs_diff(b) > 0.0, moves);
        }
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    for arch in [Arch::Fno2d, Arch::Frnn, Arch::Crnn] {
        let mut m = small(arch, 2, 2, 20);
        let mut r = rng(21);
        let x = random_tensor(&[2, 16, 16, 2], &mut r);
        let y = random_tensor(&[2, 16, 16, 2], &mut r);
        batch_loss_and_grad(&mut m, &x, &y, LossMode::Rollout).unwrap();
        let ids: Vec<_> = m.params.ids().collect();
        for id in ids {
            let n = m.params.value(id).len();
            for &i in &[0, n / 2, n - 1] {
                let analytic = m.params.grad(id).data()[i];
                let eps = 1e-6;
                let mut probe = m.clone();
                let orig = probe.params.value(id).data()[i];
                probe.params.value_mut(id).data_mut()[i] = orig + eps;
                let up = batch_loss_and_grad(&mut probe, &x, &y, LossMode::Rollout).unwrap();
                probe.params.value_mut(id).data_mut()[i] = orig - eps;
                let down = batch_loss_and_grad(&mut probe, &x, &y, LossMode::Rollout).unwrap();
                let fd = (up - down) / (2.0 * eps);
                let err = (analytic - fd).abs() / (fd.abs() + 1e-8);
                let name = &m.params.param(id).name;
                assert!(err < 1e-4 || (analytic - fd).abs() < 1e-9, "{arch:?} {name}[{i}]: {analytic} vs {fd}");
            }
        }
    }
}

#[test]
fn zeroed_frnn_matches_plain_rnn() {
    let mut frnn = small(Arch::Frnn, 3, 2, 30);
    frnn.zero_and_freeze_spectral();
    let rnn_cfg = ModelConfig { arch: Arch::Rnn, ..frnn.config.clone() };
    let mut rnn = Model::build(&rnn_cfg).unwrap();
    for (_, p) in frnn.params.iter() {
        if let Some(id) = rnn.params.find(&p.name) {
            *rnn.params.value_mut(id) = p.value.clone();
        }
    }
    let w = random_tensor(&[2, 16, 16, 3], &mut rng(31));
    let a = rollout(&frnn, &w, 2).unwrap();
    let b = rollout(&rnn, &w, 2).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
    assert!(frnn.spectral_params().iter().all(|&id| !frnn.params.param(id).trainable));
}

#[test]
fn from_parts_checks_layout() {
    let m = small(Arch::Fno2d, 2, 2, 0);
    assert!(Model::from_parts(&m.config, m.params.clone()).is_ok());
    let other = small(Arch::Frnn, 2, 2, 0);
    assert!(Model::from_parts(&m.config, other.params).is_err());
}
