//! CSV and manifest files written by a run.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::runner::{stream_key, RunError, RunResult};

/// One row of `exceedance.csv`: all seeds and replications of a
/// `(policy, n)` pair pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedRow {
    pub policy: String,
    pub n: usize,
    pub b: u64,
    /// Measured (post-warmup) slots.
    pub horizon: u64,
    pub exceed_count: u64,
    pub p_hat: f64,
    /// No exceedance seen: the probability is below `1 / horizon`.
    pub censored: bool,
}

#[derive(Debug, Clone, Serialize)]
struct CellRow<'a> {
    policy: String,
    n: usize,
    seed: u64,
    replication: u64,
    measured: u64,
    arrived: u64,
    served: u64,
    final_backlog: u64,
    max_w: u64,
    trace_hash: &'a str,
}

#[derive(Debug, Serialize)]
struct BacklogRow {
    policy: String,
    n: usize,
    slot: u64,
    backlog: u64,
}

#[derive(Debug, Serialize)]
struct TimingRow {
    policy: String,
    n: usize,
    seed: u64,
    replication: u64,
    wall_seconds: f64,
    micros_per_slot: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestCell {
    pub policy: String,
    pub n: usize,
    pub seed: u64,
    pub replication: u64,
    pub stream_seed: u64,
    pub trace_hash: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_sha256: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub replications: u64,
    pub coupled: bool,
    pub cells: Vec<ManifestCell>,
}

/// Canonical config text without `output_dir`: where results are written
/// does not change them.
fn identity_text(cfg: &ExperimentConfig) -> String {
    cfg.to_text().lines().filter(|l| !l.starts_with("output_dir ")).map(|l| format!("{l}\n")).collect()
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(identity_text(cfg).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn exceed_rows(result: &RunResult) -> Vec<ExceedRow> {
    let mut rows = Vec::new();
    for (policy, n, stats) in result.merged() {
        for (k, &b) in stats.thresholds.iter().enumerate() {
            let count = stats.exceed_counts[k];
            rows.push(ExceedRow {
                policy: policy.to_string(),
                n,
                b,
                horizon: stats.measured,
                exceed_count: count,
                p_hat: if stats.measured == 0 { 0.0 } else { count as f64 / stats.measured as f64 },
                censored: count == 0,
            });
        }
    }
    rows
}

fn create(path: &Path) -> Result<File, RunError> {
    File::create(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, RunError> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Writes all run outputs into `dir`; returns the files written.
/// Everything except `timing.csv` is a deterministic function of the
/// configuration.
pub fn write_outputs(cfg: &ExperimentConfig, result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    let path = dir.join("exceedance.csv");
    let mut w = csv_writer(&path)?;
    for row in exceed_rows(result) {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
    written.push(path);

    let path = dir.join("cells.csv");
    let mut w = csv_writer(&path)?;
    for c in &result.cells {
        w.serialize(CellRow {
            policy: c.policy.to_string(),
            n: c.key.n,
            seed: c.key.seed,
            replication: c.key.replication,
            measured: c.stats.measured,
            arrived: c.arrived,
            served: c.served,
            final_backlog: c.final_backlog,
            max_w: c.stats.max_w,
            trace_hash: &c.trace_hash,
        })?;
    }
    w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
    written.push(path);

    for &seed in &cfg.seeds {
        for rep in 0..cfg.replications {
            let path = dir.join(format!("backlog_s{seed}_r{rep}.csv"));
            let mut w = csv_writer(&path)?;
            for c in result.cells.iter().filter(|c| c.key.seed == seed && c.key.replication == rep) {
                for &(slot, backlog) in &c.stats.backlog_trace {
                    w.serialize(BacklogRow { policy: c.policy.to_string(), n: c.key.n, slot, backlog })?;
                }
            }
            w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
            written.push(path);
        }
    }

    let path = dir.join("timing.csv");
    let mut w = csv_writer(&path)?;
    for c in &result.cells {
        let slots = c.stats.slots_seen.max(1) as f64;
        w.serialize(TimingRow {
            policy: c.policy.to_string(),
            n: c.key.n,
            seed: c.key.seed,
            replication: c.key.replication,
            wall_seconds: c.wall_seconds,
            micros_per_slot: c.wall_seconds * 1e6 / slots,
        })?;
    }
    w.flush().map_err(|source| RunError::Io { path: path.clone(), source })?;
    written.push(path);

    let manifest = Manifest {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config_hash(cfg),
        config: identity_text(cfg),
        seeds: cfg.seeds.clone(),
        replications: cfg.replications,
        coupled: cfg.coupled,
        cells: result
            .cells
            .iter()
            .map(|c| ManifestCell {
                policy: c.policy.to_string(),
                n: c.key.n,
                seed: c.key.seed,
                replication: c.key.replication,
                stream_seed: stream_key(cfg, &c.key).seed,
                trace_hash: c.trace_hash.clone(),
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    serde_json::to_writer_pretty(create(&path)?, &manifest)?;
    written.push(path);
    Ok(written)
}

pub fn read_exceedance(path: &Path) -> Result<Vec<ExceedRow>, RunError> {
    let file = File::open(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    csv::Reader::from_reader(file).deserialize().map(|r| r.map_err(RunError::from)).collect()
}
