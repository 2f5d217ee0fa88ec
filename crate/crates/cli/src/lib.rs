//! Batch runner for the precond-risk experiments.
//!
//! `run` executes a preset or a JSON config and writes CSV tables, the
//! canonical config and a manifest; `list` shows the presets; `plot` writes
//! a matplotlib script for existing CSVs.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod presets;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Parser, Subcommand};

use crate::config::{config_hash, parse_config, pretty_json, ExperimentConfig, Pipeline};
use crate::error::{CliError, CliResult};
use crate::output::{write_file, RunManifest};
use crate::plot::PlotKind;

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "PRECOND_RISK_OUT";

#[derive(Debug, Parser)]
#[command(name = "precond-risk", version, about = "Risk of preconditioned ridgeless regression: experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a preset or a JSON config.
    #[command(group(ArgGroup::new("source").required(true).args(["experiment", "config"])))]
    Run {
        /// Preset name (see `list`).
        experiment: Option<String>,
        /// Path to a JSON experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output root; results go to `<out>/<experiment>/`.
        #[arg(long, env = OUT_ENV, default_value = "results")]
        out: PathBuf,
        /// Seed override, e.g. `0..20`, `3`, or `1,2,7`.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write a plot script when the pipeline has a natural one.
        #[arg(long)]
        plot: bool,
    },
    /// List presets with one-line descriptions.
    List,
    /// Print a preset as canonical JSON.
    Show { experiment: String },
    /// Write a matplotlib script for existing CSV files.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Script path.
        #[arg(long, default_value = "plot.py")]
        out: PathBuf,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

/// Parses a seed list such as `0..5,9`.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let bad = |msg: String| CliError::config("--seeds", msg);
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(format!("bad range start in `{part}`")))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(format!("bad range end in `{part}`")))?;
            if a >= b {
                return Err(bad(format!("empty range `{part}`")));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad(format!("`{part}` is not a seed")))?);
        }
    }
    Ok(seeds)
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Plot kind and CSV files for pipelines with a natural figure.
fn default_plot(cfg: &ExperimentConfig) -> Option<(PlotKind, Vec<&'static str>)> {
    match &cfg.pipeline {
        Pipeline::GammaSweep { simulation: Some(_), .. } => {
            Some((PlotKind::Gamma, vec!["theory.csv", "simulation_summary.csv"]))
        }
        Pipeline::GammaSweep { simulation: None, .. } => Some((PlotKind::Gamma, vec!["theory.csv"])),
        Pipeline::AlphaSweep { .. } => Some((PlotKind::Alpha, vec!["sweep.csv"])),
        Pipeline::Trajectory { .. } => Some((PlotKind::Time, vec!["trajectory.csv"])),
        _ => None,
    }
}

/// Executes `cfg` and writes its outputs under `out_root`.
///
/// Everything except the manifest's `wall_clock_seconds` is a function of
/// the config alone, whatever the worker count.
pub fn run(cfg: &ExperimentConfig, out_root: &Path, workers: Option<usize>, plot: bool) -> CliResult<RunManifest> {
    let start = Instant::now();
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::config("--workers", "must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::config("--workers", e))?;
    let tables = pool.install(|| pipeline::run_pipeline(cfg))?;

    let dir = out_root.join(cfg.output_dir_name());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = vec![write_file(&dir, "config.json", pretty_json(cfg).as_bytes(), &[])?];
    for t in &tables {
        files.push(write_file(&dir, t.file, &t.to_csv_bytes(), t.columns)?);
    }
    if plot {
        if let Some((kind, names)) = default_plot(cfg) {
            let script = plot::emit_for_dir(&dir, &names, kind)?;
            files.push(write_file(&dir, "plot.py", script.as_bytes(), &[])?);
        }
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        experiment: cfg.experiment.clone(),
        pipeline: cfg.pipeline.name().to_string(),
        config_sha256: config_hash(cfg),
        generator: precond_risk::rng::GENERATOR.to_string(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { experiment, config, out, seeds, workers, plot } => {
            let mut cfg = match (experiment, config) {
                (Some(name), _) => presets::preset(&name)?,
                (None, Some(path)) => load_config(&path)?,
                (None, None) => unreachable!("clap requires a source"),
            };
            if let Some(spec) = seeds {
                cfg.seeds = parse_seeds(&spec)?;
            }
            let manifest = run(&cfg, &out, workers, plot)?;
            println!(
                "{}: wrote {} files to {} in {:.1}s (config sha256 {})",
                manifest.experiment,
                manifest.files.len() + 1,
                out.join(cfg.output_dir_name()).display(),
                manifest.wall_clock_seconds,
                &manifest.config_sha256[..12]
            );
        }
        Command::List => {
            let items = presets::list_experiments();
            let width = items.iter().map(|i| i.0.len()).max().unwrap_or(0);
            for (name, desc) in items {
                println!("{name:<width$}  {desc}");
            }
        }
        Command::Show { experiment } => print!("{}", pretty_json(&presets::preset(&experiment)?)),
        Command::Plot { kind, out, csv } => {
            let paths: Vec<&Path> = csv.iter().map(PathBuf::as_path).collect();
            let script = plot::emit_plot_script(&paths, kind)?;
            std::fs::write(&out, script).map_err(|e| CliError::io(&out, e))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
