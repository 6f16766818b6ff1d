//! Run configuration with layered resolution: profile defaults, then a JSON
//! config file, then command-line flags.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spectralseq_core::models::Arch;
use spectralseq_core::pde::{Case, GenerateConfig};
use spectralseq_core::training::{LossMode, NormMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Laptop-scale sweep.
    Desk,
    /// Full-size models and datasets.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub case: Case,
    pub archs: Vec<Arch>,
    pub noise: Vec<f64>,
    pub grid: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub width: usize,
    pub modes: usize,
    pub batch: usize,
    pub lr: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    pub loss: LossMode,
    pub norm: NormMode,
    /// Noise factor applied to normalized training inputs and targets.
    pub train_noise: f64,
    pub resample_noise: bool,
    pub eval_every: usize,
    pub parallel: usize,
    pub generate: GenerateConfig,
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        let base = Self {
            profile,
            case: Case::Wave,
            archs: vec![Arch::Crnn, Arch::Fno2d, Arch::Frnn],
            noise: vec![0.0, 0.05, 0.1, 0.25],
            grid: 32,
            n_train: 100,
            n_test: 20,
            epochs: 200,
            width: 16,
            modes: 8,
            batch: 10,
            lr: 1e-3,
            decay: 0.9,
            decay_every: 100,
            seed: 0,
            loss: LossMode::Rollout,
            norm: NormMode::PerPoint,
            train_noise: 0.0,
            resample_noise: false,
            eval_every: 0,
            parallel: 1,
            generate: GenerateConfig::default(),
        };
        match profile {
            Profile::Desk => base,
            Profile::Paper => {
                Self { grid: 64, n_train: 800, n_test: 200, epochs: 1000, width: 32, modes: 16, batch: 50, ..base }
            }
        }
    }

    /// Splits a total simulation count in the profile's train:test ratio.
    pub fn set_sims(&mut self, total: usize) {
        let ratio = self.n_test as f64 / (self.n_train + self.n_test) as f64;
        let test = ((total as f64 * ratio).round() as usize).clamp(1, total.saturating_sub(1).max(1));
        self.n_test = test;
        self.n_train = total.saturating_sub(test);
        self.batch = self.batch.min(self.n_train.max(1));
    }

    pub fn sims(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            decay: self.decay,
            decay_every: self.decay_every,
            batch: self.batch,
            seed: self.seed,
            loss: self.loss,
            train_noise: self.train_noise,
            resample_noise: self.resample_noise,
            norm: self.norm,
            eval_every: self.eval_every,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.archs.is_empty(), "at least one architecture is required");
        anyhow::ensure!(self.noise.iter().all(|&n| n >= 0.0), "noise levels must be >= 0");
        anyhow::ensure!(self.n_train >= 1 && self.n_test >= 1, "need at least one train and one test simulation");
        anyhow::ensure!(self.parallel >= 1, "--parallel must be >= 1");
        Ok(())
    }
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<Case>,
    pub archs: Option<Vec<Arch>>,
    pub noise: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub sims: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
    pub lr: Option<f64>,
    pub train_noise: Option<f64>,
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Resolves defaults < config file < flags. The profile itself is taken from
/// the flag, else the config file, else [`Profile::Desk`].
pub fn resolve(profile: Option<Profile>, file: Option<Value>, flags: &Overrides) -> anyhow::Result<RunConfig> {
    let from_file = file
        .as_ref()
        .and_then(|v| v.get("profile"))
        .map(|p| serde_json::from_value::<Profile>(p.clone()))
        .transpose()?;
    let profile = profile.or(from_file).unwrap_or(Profile::Desk);
    let mut value = serde_json::to_value(RunConfig::profile(profile))?;
    if let Some(file) = file {
        anyhow::ensure!(file.is_object(), "config file must hold a JSON object");
        merge(&mut value, file);
    }
    value["profile"] = serde_json::to_value(profile)?;
    let mut cfg: RunConfig = serde_json::from_value(value)?;
    if let Some(c) = flags.case {
        cfg.case = c;
    }
    if let Some(a) = &flags.archs {
        cfg.archs = a.clone();
    }
    if let Some(n) = &flags.noise {
        cfg.noise = n.clone();
    }
    if let Some(g) = flags.grid {
        cfg.grid = g;
    }
    if let Some(s) = flags.sims {
        cfg.set_sims(s);
    }
    if let Some(e) = flags.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(p) = flags.parallel {
        cfg.parallel = p;
    }
    if let Some(lr) = flags.lr {
        cfg.lr = lr;
    }
    if let Some(n) = flags.train_noise {
        cfg.train_noise = n;
    }
    cfg.validate()?;
    Ok(cfg)
}
