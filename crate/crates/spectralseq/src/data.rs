//! Dataset generation and on-disk caching.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use spectralseq_core::data::TrajectoryDataset;
use spectralseq_core::pde::{dataset_meta, generate_sim, Case, GenerateConfig};
use spectralseq_core::Tensor;

use crate::format::{load_dataset, save_dataset};

pub const DATA_DIR_ENV: &str = "SPECTRALSEQ_DATA_DIR";

/// Default dataset directory: `$SPECTRALSEQ_DATA_DIR`, else `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

pub fn dataset_file_name(case: Case, grid: usize, sims: usize, seed: u64) -> String {
    format!("{}_g{grid}_s{sims}_seed{seed}.frnn", case.name())
}

/// Generates `n_sims` simulations, in parallel when `parallel` is set. Each
/// simulation depends only on `(seed, index)`, so both paths agree bitwise.
pub fn generate_dataset(
    case: Case,
    n_sims: usize,
    grid: usize,
    seed: u64,
    cfg: &GenerateConfig,
    parallel: bool,
) -> anyhow::Result<TrajectoryDataset> {
    anyhow::ensure!(n_sims >= 1, "need at least one simulation");
    let coords = case.grid(grid)?;
    let one = |i: usize| generate_sim(case, &coords, seed, i, n_sims, cfg);
    let sims: Vec<Tensor> = if parallel {
        (0..n_sims).into_par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        (0..n_sims).map(one).collect::<Result<_, _>>()?
    };
    Ok(TrajectoryDataset::new(Tensor::stack(&sims)?, dataset_meta(case, &coords, seed, cfg))?)
}

/// Loads the cached dataset at `path` if it matches the request, otherwise
/// generates and saves it.
pub fn ensure_dataset(
    path: &Path,
    case: Case,
    n_sims: usize,
    grid: usize,
    seed: u64,
    cfg: &GenerateConfig,
) -> anyhow::Result<TrajectoryDataset> {
    if path.exists() {
        let ds = load_dataset(path)?;
        let [s, f, nx, ny] = ds.dims();
        if s == n_sims
            && f == case.n_frames()
            && nx == grid
            && ny == grid
            && ds.meta.seed == seed
            && ds.meta.pde == case.name()
        {
            return Ok(ds);
        }
    }
    let ds = generate_dataset(case, n_sims, grid, seed, cfg, true)?;
    save_dataset(&ds, path)?;
    Ok(ds)
}

/// Min and max over all frames.
pub fn value_range(ds: &TrajectoryDataset) -> (f64, f64) {
    ds.frames.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
