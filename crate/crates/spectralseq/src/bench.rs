//! Noise-sweep benchmark: train each architecture once, evaluate at every
//! noise level, and emit a results table and a log-MSE scatter plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spectralseq_core::data::split;
use spectralseq_core::models::Arch;

use crate::config::RunConfig;
use crate::data::{dataset_file_name, ensure_dataset};
use crate::run::{evaluate_levels, train_run};

pub const RESULTS_HEADER: &str = "case,arch,N,mse,params,train_seconds";
pub const RESULTS_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "scatter.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub case: String,
    pub arch: Arch,
    pub noise: f64,
    pub mse: f64,
    pub params: usize,
    pub train_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub rows: Vec<ResultRow>,
    pub dataset: PathBuf,
    pub results: PathBuf,
    pub plot: PathBuf,
}

/// Runs every `(case, arch)` cell of `cfg` under `out_dir`, reading or caching
/// the dataset in `data_dir`.
pub fn run_benchmark(cfg: &RunConfig, data_dir: &Path, out_dir: &Path) -> anyhow::Result<BenchmarkOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let dataset = data_dir.join(dataset_file_name(cfg.case, cfg.grid, cfg.sims(), cfg.seed));
    write_manifest(out_dir, "benchmark", cfg, &dataset)?;
    let ds = ensure_dataset(&dataset, cfg.case, cfg.sims(), cfg.grid, cfg.seed, &cfg.generate)?;
    let (train, test) = split(&ds, cfg.n_train, cfg.n_test)?;
    let cell = |arch: Arch| -> anyhow::Result<Vec<ResultRow>> {
        let dir = out_dir.join(format!("{}_{}", cfg.case.name(), arch.name()));
        let outcome = train_run(cfg, arch, &train, &test, None, &dir)?;
        let ck = &outcome.checkpoint;
        let reports = evaluate_levels(&ck.model, &ck.normalizer, &test, &cfg.noise, cfg.seed, cfg.batch)?;
        Ok(reports
            .into_iter()
            .map(|r| ResultRow {
                case: cfg.case.name().to_string(),
                arch,
                noise: r.noise,
                mse: r.mse,
                params: r.params,
                train_seconds: outcome.train_seconds,
            })
            .collect())
    };
    let cells: Vec<anyhow::Result<Vec<ResultRow>>> = if cfg.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.parallel).build()?;
        pool.install(|| {
            use rayon::prelude::*;
            cfg.archs.par_iter().map(|&a| cell(a)).collect()
        })
    } else {
        cfg.archs.iter().map(|&a| cell(a)).collect()
    };
    let mut rows = Vec::new();
    for c in cells {
        rows.extend(c?);
    }
    let results = out_dir.join(RESULTS_FILE);
    fs::write(&results, results_csv(&rows))?;
    let plot = out_dir.join(PLOT_FILE);
    fs::write(&plot, scatter_svg(&rows))?;
    Ok(BenchmarkOutput { rows, dataset, results, plot })
}

pub fn write_manifest(out_dir: &Path, command: &str, cfg: &RunConfig, dataset: &Path) -> anyhow::Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "generator": spectralseq_core::pde::GENERATOR_VERSION,
        "dataset": dataset,
        "config": cfg,
    });
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{:.3}", r.case, r.arch.name(), r.noise, r.mse, r.params, r.train_seconds);
    }
    s
}

const COLORS: [&str; 4] = ["#1b6ca8", "#d1495b", "#2e933c", "#8d6a9f"];

/// Self-contained SVG of `log10(mse)` against the noise factor, one series per
/// architecture.
pub fn scatter_svg(rows: &[ResultRow]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 150.0, 30.0, 50.0);
    let logs: Vec<f64> = rows.iter().map(|r| r.mse.log10()).collect();
    let finite = || logs.iter().copied().filter(|v| v.is_finite());
    let ymin = finite().fold(f64::INFINITY, f64::min).floor();
    let ymax = finite().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (ymin, ymax) = if ymin.is_finite() { (ymin, ymax.max(ymin + 1.0)) } else { (-1.0, 0.0) };
    let xmax = rows.iter().map(|r| r.noise).fold(0.0, f64::max).max(1e-12);
    let px = |x: f64| left + (w - left - right) * x / xmax;
    let py = |y: f64| top + (h - top - bottom) * (ymax - y) / (ymax - ymin);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - bottom, w - right, h - bottom);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, h - bottom);
    let mut ticks: Vec<f64> = rows.iter().map(|r| r.noise).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in ticks {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="12" text-anchor="middle">{t}</text>"#,
            px(t),
            h - bottom + 18.0
        );
    }
    let mut y = ymin;
    while y <= ymax {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{y}</text>"#,
            left - 8.0,
            py(y) + 4.0
        );
        y += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" font-size="13" text-anchor="middle">noise factor N</text>"#,
        (left + w - right) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">log10(MSE)</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    let mut archs: Vec<Arch> = Vec::new();
    for r in rows {
        if !archs.contains(&r.arch) {
            archs.push(r.arch);
        }
    }
    for (k, arch) in archs.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .zip(&logs)
            .filter(|(r, l)| r.arch == *arch && l.is_finite())
            .map(|(r, &l)| (r.noise, l, r.mse))
            .collect();
        let path: Vec<String> = pts.iter().map(|&(x, l, _)| format!("{:.2},{:.2}", px(x), py(l))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, path.join(" "));
        for &(x, l, mse) in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}" data-arch="{}" data-noise="{x}" data-mse="{mse}" data-log10-mse="{l}"/>"#,
                px(x),
                py(l),
                arch.name()
            );
        }
        let ly = top + 20.0 * k as f64;
        let _ = writeln!(s, r#"<circle cx="{}" cy="{ly}" r="4" fill="{color}"/>"#, w - right + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, w - right + 30.0, ly + 4.0, arch.name());
    }
    s.push_str("</svg>\n");
    s
}
