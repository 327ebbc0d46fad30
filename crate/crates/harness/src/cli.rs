//! Command-line interface of the `mcsched` binary.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcsched::analysis::{compute_upper_bound, BoundParams, BoundTerm};
use thiserror::Error;

use crate::bench::bench;
use crate::config::{parse_arrival, ConfigError, ExperimentConfig};
use crate::output::{config_hash, exceed_rows, read_exceedance, write_outputs, Manifest};
use crate::runner::{run_experiment, with_threads, RunError};
use crate::sweep::{figure_sweep, SweepMode};
use crate::verify::{verify, Check};

#[derive(Debug, Parser)]
#[command(name = "mcsched", version, about = "Multi-channel multi-user scheduling experiments")]
pub struct Cli {
    /// Replace the configured seeds with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replace the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent cells (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every cell of an experiment and write CSV files and a manifest.
    Run { config: PathBuf },
    /// Run (or reuse) an experiment and write P(W > b) plot data.
    Sweep {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(SweepModeArg))]
        mode: SweepModeArg,
        /// Read exceedance.csv from the output directory instead of running.
        #[arg(long)]
        reuse: bool,
    },
    /// Print the rate-function upper bound.
    Bound {
        #[arg(long = "L")]
        l: u32,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        b: u64,
        /// Arrival model for L > 1, e.g. `markov_burst(batch=5, p11=0.5, p21=0.1)`.
        #[arg(long)]
        arrival_model: Option<String>,
        #[arg(long, default_value_t = 200)]
        t_max: u32,
    },
    /// Check OPF, MWF or dominance on every simulated slot.
    Verify {
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(CheckArg))]
        check: CheckArg,
        /// MWF threshold M (default n).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Time each policy's per-slot decision.
    Bench { config: PathBuf },
}

#[derive(Debug, Clone, Copy)]
pub struct SweepModeArg(pub SweepMode);

impl std::str::FromStr for SweepModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(SweepModeArg)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckArg(pub Check);

impl std::str::FromStr for CheckArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(CheckArg)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0} violations found")]
    ChecksFailed(u64),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::Config(_) => ExitCode::from(2),
            CliError::Run(_) | CliError::ChecksFailed(_) => ExitCode::from(1),
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(&cli, config)?;
            let result = with_threads(cli.threads, || run_experiment(&cfg))??;
            let files = write_outputs(&cfg, &result, &cfg.output_dir)?;
            for row in exceed_rows(&result) {
                let flag = if row.censored { " (censored)" } else { "" };
                println!("{} n={} b={}: P(W>b) = {:e}{flag}", row.policy, row.n, row.b, row.p_hat);
            }
            println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
        }
        Command::Sweep { config, mode, reuse } => {
            let cfg = load(&cli, config)?;
            let rows = if *reuse {
                let manifest_path = cfg.output_dir.join("manifest.json");
                let text = std::fs::read_to_string(&manifest_path)
                    .map_err(|source| RunError::Io { path: manifest_path.clone(), source })?;
                let manifest: Manifest = serde_json::from_str(&text).map_err(RunError::from)?;
                if manifest.config_sha256 != config_hash(&cfg) {
                    return Err(CliError::Usage(format!(
                        "{} was produced by a different configuration; rerun without --reuse",
                        cfg.output_dir.display()
                    )));
                }
                read_exceedance(&cfg.output_dir.join("exceedance.csv"))?
            } else {
                let result = with_threads(cli.threads, || run_experiment(&cfg))??;
                write_outputs(&cfg, &result, &cfg.output_dir)?;
                exceed_rows(&result)
            };
            let (files, fits) = figure_sweep(&cfg, &rows, mode.0, &cfg.output_dir)?;
            for f in fits {
                match f.fit {
                    Ok(fit) => println!("{} b={}: slope {:.4} ± {:.4}", f.policy, f.b, fit.slope, fit.std_err),
                    Err(e) => println!("{} b={}: no slope ({e})", f.policy, f.b),
                }
            }
            println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
        }
        Command::Bound { l, q, b, arrival_model, t_max } => {
            let arrivals = match arrival_model {
                Some(s) => Some(parse_arrival(s).map_err(CliError::Usage)?),
                None if *l > 1 => return Err(CliError::Usage("--arrival-model is required when L > 1".into())),
                None => None,
            };
            let bp = BoundParams { l: *l, q: *q, b: *b, arrivals, t_max: *t_max };
            let ub = compute_upper_bound(&bp).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{:.6}", ub.value);
            let term = match ub.attained_by {
                BoundTerm::AllOff => "(b+1) I_X".to_string(),
                BoundTerm::Burst { c, t } => format!("I_A(t={t}, x={}) + {c} I_X", b - c),
                BoundTerm::BoundaryBurst { c, t } => format!("I_A(t={t}, x={}) + {} I_X", b - c, c + 1),
            };
            eprintln!(
                "attained by {term}; I_X = {:.6}; t_max = {}; monotone tail: {}",
                ub.i_x, ub.t_max, ub.tail_monotone
            );
        }
        Command::Verify { config, check, m } => {
            let cfg = load(&cli, config)?;
            let report = with_threads(cli.threads, || verify(&cfg, check.0, *m))??;
            println!("{report}");
            if report.violations() > 0 {
                return Err(CliError::ChecksFailed(report.violations()));
            }
        }
        Command::Bench { config } => {
            let cfg = load(&cli, config)?;
            let report = bench(&cfg)?;
            print!("{}", report.to_csv());
            for spec in &cfg.policies {
                if let Some(s) = report.log_log_slope(&spec.to_string()) {
                    println!("# {spec}: log-log slope {s:.3}");
                }
            }
            std::fs::create_dir_all(&cfg.output_dir)
                .and_then(|_| std::fs::write(cfg.output_dir.join("bench.csv"), report.to_csv()))
                .map_err(|source| RunError::Io { path: cfg.output_dir.clone(), source })?;
        }
    }
    Ok(())
}
