//! Running configured experiments cell by cell.

use std::time::Instant;

use mcsched::analysis::DelayStats;
use mcsched::policies::{Policy, PolicyError, PolicySpec};
use mcsched::traffic::{ArrivalGenerator, ChannelGenerator, ModelError, StreamKey};
use mcsched::{ConnectivityMatrix, Packet, Schedule, SimError, SystemParams, SystemState};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("policy {policy} produced an invalid schedule at slot {slot}: {source}")]
    Schedule { policy: PolicySpec, slot: u64, source: SimError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("missing results for: {}", .0.join(", "))]
    MissingCells(Vec<String>),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// One `(policy, n, seed, replication)` run. Sorting by key fixes the
/// order in which results are merged and written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub policy: usize,
    pub n: usize,
    pub seed: u64,
    pub replication: u64,
}

/// Stream key of a cell. Coupled runs share traces across policies;
/// otherwise the policy index is folded into the seed.
pub fn stream_key(cfg: &ExperimentConfig, key: &CellKey) -> StreamKey {
    let seed =
        if cfg.coupled { key.seed } else { key.seed ^ (key.policy as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) };
    StreamKey::new(seed, key.replication)
}

/// A single system driven by one policy over seeded traces.
pub struct Simulation {
    pub state: SystemState,
    pub conn: ConnectivityMatrix,
    policy: Box<dyn Policy>,
    arrivals: ArrivalGenerator,
    channel: ChannelGenerator,
    counts: Vec<u32>,
    hasher: Sha256,
    packed: Vec<u8>,
    pub arrived: u64,
    pub served: u64,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, spec: &PolicySpec, n: usize, key: StreamKey) -> Result<Self, RunError> {
        let params = SystemParams::new(n, cfg.arrival.max_arrivals())?;
        let mut state = SystemState::new(params);
        let l = params.max_arrivals;
        let mut left = cfg.prefill;
        while left > 0 {
            let k = left.min(l);
            state.apply_arrivals(&vec![k; n])?;
            state.advance_slot();
            left -= k;
        }
        Ok(Self {
            state,
            conn: ConnectivityMatrix::disconnected(n),
            policy: spec.build(&params)?,
            arrivals: ArrivalGenerator::new(cfg.arrival, n, key)?,
            channel: ChannelGenerator::new(cfg.channel, n, key)?,
            counts: vec![0; n],
            hasher: Sha256::new(),
            packed: vec![0; (n * n).div_ceil(8)],
            arrived: 0,
            served: 0,
        })
    }

    pub fn spec(&self) -> PolicySpec {
        self.policy.spec()
    }

    /// Arrivals for this slot, then connectivity; both go into the trace hash.
    pub fn begin_slot(&mut self) -> Result<(), RunError> {
        self.arrivals.next_slot(&mut self.counts);
        self.state.apply_arrivals(&self.counts)?;
        self.arrived += self.counts.iter().map(|&c| c as u64).sum::<u64>();
        self.channel.next_slot(&mut self.conn);
        self.packed.fill(0);
        for (k, &on) in self.conn.as_slice().iter().enumerate() {
            if on {
                self.packed[k / 8] |= 1 << (k % 8);
            }
        }
        for c in &self.counts {
            self.hasher.update(c.to_le_bytes());
        }
        self.hasher.update(&self.packed);
        Ok(())
    }

    pub fn decide(&mut self) -> Schedule {
        self.policy.schedule(&self.state, &self.conn)
    }

    /// Applies `sched`, then moves to the next slot.
    pub fn finish_slot(&mut self, sched: &Schedule) -> Result<Vec<Packet>, RunError> {
        let slot = self.state.slot();
        let served = self.state.apply_schedule(sched).map_err(|source| RunError::Schedule {
            policy: self.policy.spec(),
            slot,
            source,
        })?;
        self.served += served.len() as u64;
        self.state.advance_slot();
        Ok(served)
    }

    pub fn trace_hash(&self) -> String {
        hex(&self.hasher.clone().finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: CellKey,
    pub policy: PolicySpec,
    pub stats: DelayStats,
    pub arrived: u64,
    pub served: u64,
    pub final_backlog: u64,
    pub trace_hash: String,
    pub wall_seconds: f64,
}

pub fn run_cell(cfg: &ExperimentConfig, key: CellKey) -> Result<CellResult, RunError> {
    let spec = cfg.policies[key.policy];
    let mut sim = Simulation::new(cfg, &spec, key.n, stream_key(cfg, &key))?;
    let mut stats = DelayStats::new(cfg.thresholds.clone(), cfg.warmup, cfg.trace_stride);
    let start = Instant::now();
    for _ in 0..cfg.horizon {
        sim.begin_slot()?;
        stats.record_slot(&sim.state);
        let sched = sim.decide();
        sim.finish_slot(&sched)?;
    }
    Ok(CellResult {
        key,
        policy: spec,
        stats,
        arrived: sim.arrived,
        served: sim.served,
        final_backlog: sim.state.backlog() as u64,
        trace_hash: sim.trace_hash(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn cell_keys(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for policy in 0..cfg.policies.len() {
        for &n in &cfg.n_values {
            for &seed in &cfg.seeds {
                for replication in 0..cfg.replications {
                    keys.push(CellKey { policy, n, seed, replication });
                }
            }
        }
    }
    keys
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Sorted by key.
    pub cells: Vec<CellResult>,
}

/// Runs every cell in parallel; results are sorted by key, so the outcome
/// does not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, RunError> {
    let keys = cell_keys(cfg);
    let mut cells = keys.into_par_iter().map(|k| run_cell(cfg, k)).collect::<Result<Vec<_>, _>>()?;
    cells.sort_by_key(|c| c.key);
    Ok(RunResult { cells })
}

impl RunResult {
    /// Stats of all seeds and replications merged, per `(policy, n)`.
    pub fn merged(&self) -> Vec<(PolicySpec, usize, DelayStats)> {
        let mut out: Vec<(usize, PolicySpec, usize, DelayStats)> = Vec::new();
        for c in &self.cells {
            match out.last_mut() {
                Some((p, _, n, stats)) if *p == c.key.policy && *n == c.key.n => {
                    stats.merge(&c.stats).expect("cells of one config share thresholds");
                }
                _ => {
                    let mut stats = c.stats.clone();
                    stats.backlog_trace.clear();
                    out.push((c.key.policy, c.policy, c.key.n, stats));
                }
            }
        }
        out.into_iter().map(|(_, p, n, s)| (p, n, s)).collect()
    }
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| RunError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
