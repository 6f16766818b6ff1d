mod common;

use common::{meta, random_dataset, random_tensor, rng};
use spectralseq_core::data::{
    add_noise, batch_iter, corrupt_dataset, derive_seed, split, BatchSource, NoiseSpec, TrajectoryDataset,
};
use spectralseq_core::{Error, Tensor};

#[test]
fn zero_noise_is_identity() {
    let x = random_tensor(&[3, 4, 5], &mut rng(1));
    assert_eq!(add_noise(&x, &NoiseSpec { variance: 0.0, seed: 9 }).unwrap(), x);
}

#[test]
fn noise_moments_at_quarter_variance() {
    let x = Tensor::zeros(&[1_000_000]);
    let y = add_noise(&x, &NoiseSpec { variance: 0.25, seed: 2024 }).unwrap();
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert!((0.2475..=0.2525).contains(&var), "variance {var}");
    assert!(mean.abs() <= 0.0015, "mean {mean}");
}

#[test]
fn noise_seed_contract() {
    let x = Tensor::zeros(&[64]);
    let a = add_noise(&x, &NoiseSpec { variance: 0.1, seed: 1 }).unwrap();
    let b = add_noise(&x, &NoiseSpec { variance: 0.1, seed: 1 }).unwrap();
    let c = add_noise(&x, &NoiseSpec { variance: 0.1, seed: 2 }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for bad in [-0.1, f64::NAN, f64::INFINITY] {
        assert!(matches!(add_noise(&x, &NoiseSpec { variance: bad, seed: 0 }), Err(Error::Config(_))));
    }
}

#[test]
fn corrupt_dataset_uses_independent_streams_per_sim_and_epoch() {
    let ds = TrajectoryDataset::new(Tensor::zeros(&[3, 2, 4, 4]), meta(1, 1)).unwrap();
    let a = corrupt_dataset(&ds, 0.5, 7, 0).unwrap();
    let b = corrupt_dataset(&ds, 0.5, 7, 1).unwrap();
    assert_ne!(a.frames, b.frames);
    assert_eq!(a, corrupt_dataset(&ds, 0.5, 7, 0).unwrap());
    let sim = |d: &TrajectoryDataset, s: usize| d.frames.data()[s * 32..(s + 1) * 32].to_vec();
    assert_ne!(sim(&a, 0), sim(&a, 1));
    let one = corrupt_dataset(&ds.slice_sims(0, 1).unwrap(), 0.5, 7, 0).unwrap();
    assert_eq!(sim(&one, 0), sim(&a, 0));
    assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

#[test]
fn split_is_leading_and_disjoint() {
    let ids = Tensor::from_fn(&[1000, 1, 1, 1], |k| k as f64);
    let ds = TrajectoryDataset::new(ids, meta(1, 0)).unwrap();
    let (tr, te) = split(&ds, 800, 200).unwrap();
    assert_eq!((tr.n_sims(), te.n_sims()), (800, 200));
    assert_eq!(tr.frames.data()[799], 799.0);
    assert_eq!(te.frames.data()[0], 800.0);
    let (tr, te) = split(&ds.slice_sims(0, 10).unwrap(), 8, 2).unwrap();
    let train_ids: Vec<f64> = tr.frames.data().to_vec();
    assert!(te.frames.data().iter().all(|v| !train_ids.contains(v)));
    assert!(split(&ds, 900, 200).is_err());
}

#[test]
fn dataset_rejects_bad_frames() {
    assert!(TrajectoryDataset::new(Tensor::zeros(&[2, 3, 4]), meta(1, 1)).is_err());
    let mut t = Tensor::zeros(&[1, 2, 2, 2]);
    t.data_mut()[3] = f64::NAN;
    assert!(TrajectoryDataset::new(t, meta(1, 1)).is_err());
}

#[test]
fn windows_are_channel_last() {
    let ds = random_dataset(2, 6, 3, 2, 4);
    let w = ds.windows(&[1, 0], 2, 3).unwrap();
    assert_eq!(w.shape(), &[2, 3, 3, 3]);
    for (b, sim) in [1usize, 0].iter().enumerate() {
        for p in 0..9 {
            for t in 0..3 {
                assert_eq!(w.data()[(b * 9 + p) * 3 + t], ds.frames.data()[(sim * 6 + 2 + t) * 9 + p]);
            }
        }
    }
}

#[test]
fn subsample_keeps_every_other_point() {
    let ds = random_dataset(1, 2, 8, 1, 5);
    let sub = ds.subsample(2).unwrap();
    assert_eq!(sub.dims(), [1, 2, 4, 4]);
    assert_eq!(sub.frames.data()[4 + 1], ds.frames.data()[2 * 8 + 2]);
    assert!(ds.subsample(3).is_err());
    assert!(ds.subsample(0).is_err());
}

fn batch_sizes(sims: usize, batch: usize) -> Vec<usize> {
    let ds = TrajectoryDataset::new(Tensor::zeros(&[sims, 2, 1, 1]), meta(1, 1)).unwrap();
    let src = BatchSource { clean: &ds, noisy: None, corrupt_targets: false, t_in: 1, t_out: 1 };
    batch_iter(src, batch, 0, 0).unwrap().map(|b| b.unwrap().sims.len()).collect()
}

#[test]
fn batch_counts() {
    assert_eq!(batch_sizes(800, 50).len(), 16);
    assert_eq!(batch_sizes(10, 4), vec![4, 4, 2]);
    assert_eq!(batch_sizes(5, 5), vec![5]);
}

fn order(ds: &TrajectoryDataset, seed: u64, epoch: u64) -> Vec<usize> {
    let src = BatchSource { clean: ds, noisy: None, corrupt_targets: false, t_in: 1, t_out: 1 };
    batch_iter(src, 3, seed, epoch).unwrap().flat_map(|b| b.unwrap().sims).collect()
}

#[test]
fn shuffle_is_seeded_per_epoch() {
    let ds = TrajectoryDataset::new(Tensor::zeros(&[20, 2, 1, 1]), meta(1, 1)).unwrap();
    let e0 = order(&ds, 1, 0);
    assert_eq!(e0, order(&ds, 1, 0));
    assert_ne!(e0, order(&ds, 1, 1));
    assert_ne!(e0, order(&ds, 2, 0));
    let mut sorted = e0.clone();
    sorted.sort();
    assert_eq!(sorted, (0..20).collect::<Vec<_>>());
}

#[test]
fn batch_sources_route_noise() {
    let clean = random_dataset(4, 5, 4, 2, 6);
    let noisy = corrupt_dataset(&clean, 0.3, 1, 0).unwrap();
    for corrupt_targets in [false, true] {
        let src = BatchSource { clean: &clean, noisy: Some(&noisy), corrupt_targets, t_in: 2, t_out: 3 };
        for b in batch_iter(src, 3, 0, 0).unwrap() {
            let b = b.unwrap();
            assert_eq!(b.inputs, noisy.windows(&b.sims, 0, 2).unwrap());
            let target_src = if corrupt_targets { &noisy } else { &clean };
            assert_eq!(b.targets, target_src.windows(&b.sims, 2, 3).unwrap());
        }
    }
}

#[test]
fn batch_iter_errors() {
    let ds = random_dataset(4, 5, 4, 2, 7);
    let src = |t_out| BatchSource { clean: &ds, noisy: None, corrupt_targets: false, t_in: 2, t_out };
    assert!(matches!(batch_iter(src(3), 5, 0, 0), Err(Error::Config(_))));
    assert!(matches!(batch_iter(src(3), 0, 0, 0), Err(Error::Config(_))));
    assert!(matches!(batch_iter(src(4), 2, 0, 0), Err(Error::Shape(_))));
}
