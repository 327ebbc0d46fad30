//! Experiment harness for the `mcsched` scheduling library: configuration,
//! parallel seeded runs, CSV/plot output, per-slot verification and
//! benchmarks.

pub mod bench;
pub mod cli;
pub mod config;
pub mod output;
pub mod runner;
pub mod sweep;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run_experiment, CellKey, CellResult, RunError, RunResult};
