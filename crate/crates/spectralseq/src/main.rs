use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use spectralseq::bench::{run_benchmark, write_manifest};
use spectralseq::checkpoint::load_checkpoint;
use spectralseq::config::{resolve, Overrides, Profile, RunConfig};
use spectralseq::data::{data_dir, dataset_file_name, ensure_dataset, generate_dataset, value_range};
use spectralseq::format::{load_dataset, save_dataset};
use spectralseq::run::{evaluate_levels, train_run};
use spectralseq_core::data::split;
use spectralseq_core::models::Arch;
use spectralseq_core::pde::Case;

#[derive(Parser)]
#[command(name = "spectralseq", version, about = "Fourier-layer sequence models for PDE rollouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// wave, ns_laminar or ns_turbulent.
    #[arg(long, value_parser = parse_case)]
    case: Option<Case>,
    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Total simulations (train + test).
    #[arg(long)]
    sims: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Seed for data, initialization and noise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// JSON file with configuration values; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it to a dataset file.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output file; defaults to a name under $SPECTRALSEQ_DATA_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generate simulations one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Train one architecture and write a checkpoint and metrics.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// fno, frnn, crnn or rnn.
        #[arg(long, value_parser = parse_arch)]
        arch: Arch,
        /// Dataset file; generated and cached when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint for another `--epochs` epochs.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Noise factor applied to normalized training data.
        #[arg(long)]
        noise: Option<f64>,
        /// Initial learning rate.
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Evaluate a checkpoint on a dataset at one or more noise levels.
    Eval {
        /// Checkpoint written by `train` or `benchmark`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file with the same grid and frame counts.
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        noise: Vec<f64>,
        /// Run seed the evaluation noise is derived from.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evaluate on every simulation instead of the held-out split.
        #[arg(long)]
        all: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train each architecture once and evaluate it at every noise level.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Comma-separated architectures.
        #[arg(long, value_delimiter = ',', value_parser = parse_arch)]
        arch: Option<Vec<Arch>>,
        /// Comma-separated evaluation noise levels.
        #[arg(long, value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        /// Train up to this many architectures concurrently.
        #[arg(long)]
        parallel: Option<usize>,
    },
}

fn parse_case(s: &str) -> Result<Case, String> {
    Case::parse(s).ok_or_else(|| format!("unknown case {s:?} (expected wave, ns_laminar or ns_turbulent)"))
}

fn parse_arch(s: &str) -> Result<Arch, String> {
    Arch::parse(s).ok_or_else(|| format!("unknown architecture {s:?} (expected fno, frnn, crnn or rnn)"))
}

fn config(common: &Common, extra: Overrides) -> anyhow::Result<RunConfig> {
    let file = match &common.config {
        Some(p) => Some(
            serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                .with_context(|| format!("parsing {}", p.display()))?,
        ),
        None => None,
    };
    let flags = Overrides {
        case: common.case,
        grid: common.grid,
        sims: common.sims,
        epochs: common.epochs,
        seed: common.seed,
        ..extra
    };
    resolve(common.profile, file, &flags)
}

fn default_dataset(cfg: &RunConfig) -> PathBuf {
    data_dir().join(dataset_file_name(cfg.case, cfg.grid, cfg.sims(), cfg.seed))
}

fn generate(common: &Common, out: Option<PathBuf>, serial: bool) -> anyhow::Result<()> {
    let cfg = config(common, Overrides::default())?;
    let path = out.unwrap_or_else(|| default_dataset(&cfg));
    let ds = generate_dataset(cfg.case, cfg.sims(), cfg.grid, cfg.seed, &cfg.generate, !serial)?;
    save_dataset(&ds, &path)?;
    let [s, f, nx, ny] = ds.dims();
    let (lo, hi) = value_range(&ds);
    println!("wrote {}", path.display());
    println!("case {} | {s} simulations | {f} frames | grid {nx}x{ny} | min {lo:.6} | max {hi:.6}", cfg.case.name());
    Ok(())
}

fn train(
    common: &Common,
    arch: Arch,
    dataset: Option<PathBuf>,
    out: &Path,
    resume: Option<PathBuf>,
    extra: Overrides,
) -> anyhow::Result<()> {
    let mut cfg = config(common, extra)?;
    let ds = match &dataset {
        Some(p) => {
            let ds = load_dataset(p).with_context(|| format!("loading {}", p.display()))?;
            cfg.case =
                Case::parse(&ds.meta.pde).with_context(|| format!("dataset holds unknown case {:?}", ds.meta.pde))?;
            cfg.grid = ds.dims()[2];
            if ds.n_sims() != cfg.sims() {
                cfg.set_sims(ds.n_sims());
            }
            ds
        }
        None => ensure_dataset(&default_dataset(&cfg), cfg.case, cfg.sims(), cfg.grid, cfg.seed, &cfg.generate)?,
    };
    let ds_path = dataset.unwrap_or_else(|| default_dataset(&cfg));
    let resume = resume.map(|p| load_checkpoint(&p).with_context(|| format!("loading {}", p.display()))).transpose()?;
    if let Some(ck) = &resume {
        anyhow::ensure!(ck.model.config.arch == arch, "checkpoint holds a {} model", ck.model.config.arch.name());
    }
    cfg.archs = vec![arch];
    write_manifest(out, "train", &cfg, &ds_path)?;
    let (train_ds, test_ds) = split(&ds, cfg.n_train, cfg.n_test)?;
    let outcome = train_run(&cfg, arch, &train_ds, &test_ds, resume, out)?;
    let last = outcome.history.records.last();
    println!(
        "trained {} for {} epochs in {:.1}s; final train loss {}",
        arch.name(),
        outcome.history.records.len(),
        outcome.train_seconds,
        last.map(|r| r.train_loss.to_string()).unwrap_or_else(|| "n/a".into())
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(
    checkpoint: &Path,
    dataset: &Path,
    noise: &[f64],
    seed: u64,
    all: bool,
    json: bool,
    report: Option<PathBuf>,
) -> anyhow::Result<()> {
    let ck = load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let ds = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let test = match ck.split {
        Some((a, b)) if !all && a + b == ds.n_sims() => split(&ds, a, b)?.1,
        _ => ds,
    };
    let batch = ck.train.as_ref().map(|t| t.batch).unwrap_or(10);
    let reports = evaluate_levels(&ck.model, &ck.normalizer, &test, noise, seed, batch)?;
    let text = serde_json::to_string_pretty(&reports)?;
    if let Some(p) = report {
        std::fs::write(p, format!("{text}\n"))?;
    }
    if json {
        println!("{text}");
    } else {
        for r in &reports {
            println!("{r}");
        }
    }
    Ok(())
}

fn benchmark(common: &Common, out: &Path, extra: Overrides) -> anyhow::Result<()> {
    let cfg = config(common, extra)?;
    let result = run_benchmark(&cfg, &data_dir(), out)?;
    println!("{:<14} {:<6} {:>6} {:>14} {:>10}", "case", "arch", "N", "mse", "params");
    for r in &result.rows {
        println!("{:<14} {:<6} {:>6} {:>14.6e} {:>10}", r.case, r.arch.name(), r.noise, r.mse, r.params);
    }
    println!("wrote {} and {}", result.results.display(), result.plot.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { common, out, serial } => generate(&common, out, serial),
        Command::Train { common, arch, dataset, out, resume, noise, lr } => {
            let extra = Overrides { lr, train_noise: noise, ..Overrides::default() };
            train(&common, arch, dataset, &out, resume, extra)
        }
        Command::Eval { checkpoint, dataset, noise, seed, all, json, report } => {
            eval(&checkpoint, &dataset, &noise, seed, all, json, report)
        }
        Command::Benchmark { common, arch, noise, out, parallel } => {
            let extra = Overrides { archs: arch, noise, parallel, ..Overrides::default() };
            benchmark(&common, &out, extra)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let non_finite =
                e.chain().any(|c| matches!(c.downcast_ref(), Some(spectralseq_core::Error::NonFiniteLoss { .. })));
            ExitCode::from(if non_finite { 3 } else { 1 })
        }
    }
}
