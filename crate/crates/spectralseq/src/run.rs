//! Training and evaluation runs with their on-disk artifacts.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use spectralseq_core::data::{derive_seed, NoiseSpec, TrajectoryDataset};
use spectralseq_core::models::{count_params, Arch, Model, ModelConfig};
use spectralseq_core::training::{evaluate_with, train, History, Normalizer, TrainState};

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::RunConfig;

pub const METRICS_HEADER: &str = "epoch,lr,train_loss,test_mse,wall_ms";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn model_config(cfg: &RunConfig, arch: Arch) -> anyhow::Result<ModelConfig> {
    let (t_in, t_out) = cfg.case.window();
    let grid = cfg.case.grid(cfg.grid)?;
    let mc = ModelConfig::reference(arch, grid, t_in, t_out).with_size(cfg.width, cfg.modes).with_seed(cfg.seed);
    mc.validate()?;
    Ok(mc)
}

/// Seed of the evaluation noise draw for level `noise`; shared by every
/// architecture so they see the same corruption.
pub fn eval_noise_seed(seed: u64, noise: f64) -> u64 {
    derive_seed(seed, 0xe7a1, noise.to_bits())
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: History,
    pub train_seconds: f64,
}

/// Trains `arch` (or continues `resume`) on `train_raw`, streaming one metrics
/// row per epoch to `out_dir/metrics.csv` and writing the final checkpoint.
pub fn train_run(
    cfg: &RunConfig,
    arch: Arch,
    train_raw: &TrajectoryDataset,
    test_raw: &TrajectoryDataset,
    resume: Option<Checkpoint>,
    out_dir: &Path,
) -> anyhow::Result<TrainOutcome> {
    fs::create_dir_all(out_dir)?;
    let tc = cfg.train_config();
    let (mut model, normalizer, mut state) = match resume {
        Some(ck) => (ck.model, ck.normalizer, ck.state),
        None => {
            let model = Model::build(&model_config(cfg, arch)?)?;
            let normalizer = Normalizer::fit(train_raw, tc.norm)?;
            let state = TrainState::fresh(&model, &tc);
            (model, normalizer, state)
        }
    };
    let metrics_path = out_dir.join(METRICS_FILE);
    let append = state.next_epoch > 0 && metrics_path.exists();
    let file = if append { OpenOptions::new().append(true).open(&metrics_path)? } else { File::create(&metrics_path)? };
    let mut metrics = BufWriter::new(file);
    if !append {
        writeln!(metrics, "{METRICS_HEADER}")?;
    }
    let start = Instant::now();
    let mut io_err = None;
    let history = train(&mut model, train_raw, Some(test_raw), &normalizer, &tc, &mut state, |r, _, _| {
        let test = r.test_mse.map(|m| m.to_string()).unwrap_or_default();
        let line = format!("{},{},{},{},{}", r.epoch, r.lr, r.train_loss, test, start.elapsed().as_millis());
        if let Err(e) = writeln!(metrics, "{line}").and_then(|_| metrics.flush()) {
            io_err.get_or_insert(e);
        }
    });
    let train_seconds = start.elapsed().as_secs_f64();
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let history = history?;
    let checkpoint =
        Checkpoint { model, normalizer, state, train: Some(tc), split: Some((train_raw.n_sims(), test_raw.n_sims())) };
    save_checkpoint(&checkpoint, &out_dir.join(CHECKPOINT_FILE))?;
    Ok(TrainOutcome { checkpoint, history, train_seconds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub arch: String,
    pub params: usize,
    pub noise: f64,
    pub mse: f64,
    pub n_test: usize,
    pub t_out: usize,
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} ({} params): N = {} -> MSE {:.6e} over {} test simulations, {} frames",
            self.arch, self.params, self.noise, self.mse, self.n_test, self.t_out
        )
    }
}

/// Evaluates a trained model on `test_raw` at each noise level.
pub fn evaluate_levels(
    model: &Model,
    normalizer: &Normalizer,
    test_raw: &TrajectoryDataset,
    levels: &[f64],
    seed: u64,
    batch: usize,
) -> anyhow::Result<Vec<EvalReport>> {
    let mc = &model.config;
    let [_, frames, nx, ny] = test_raw.dims();
    anyhow::ensure!(
        nx == mc.grid.nx && ny == mc.grid.ny,
        "dataset grid {nx}x{ny} does not match the model grid {}x{}",
        mc.grid.nx,
        mc.grid.ny
    );
    anyhow::ensure!(
        frames >= mc.t_in + mc.t_out,
        "dataset has {frames} frames, the model needs {} + {}",
        mc.t_in,
        mc.t_out
    );
    let params = count_params(model);
    levels
        .iter()
        .map(|&noise| {
            anyhow::ensure!(noise >= 0.0, "noise level must be >= 0, got {noise}");
            let spec = NoiseSpec { variance: noise, seed: eval_noise_seed(seed, noise) };
            let mse = evaluate_with(model, &model.params, test_raw, normalizer, Some(spec), batch, mc.t_out)?;
            Ok(EvalReport {
                arch: mc.arch.name().to_string(),
                params,
                noise,
                mse,
                n_test: test_raw.n_sims(),
                t_out: mc.t_out,
            })
        })
        .collect()
}
