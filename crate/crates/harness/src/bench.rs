//! Per-slot wall-clock cost of each policy's scheduling decision.

use std::time::Instant;

use mcsched::traffic::StreamKey;

use crate::config::ExperimentConfig;
use crate::runner::{RunError, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub policy: String,
    pub n: usize,
    pub slots: u64,
    pub micros_per_slot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Least-squares slope of `ln(cost)` against `ln(n)` for one policy;
    /// `None` with fewer than two sizes.
    pub fn log_log_slope(&self, policy: &str) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.policy == policy && r.micros_per_slot > 0.0)
            .map(|r| ((r.n as f64).ln(), r.micros_per_slot.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("policy,n,slots,micros_per_slot\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{:.3}\n", r.policy, r.n, r.slots, r.micros_per_slot));
        }
        s
    }
}

/// Times only the policy decision, over `horizon` slots of the first seed,
/// for every policy and `n`. Runs sequentially so timings do not compete.
pub fn bench(cfg: &ExperimentConfig) -> Result<BenchReport, RunError> {
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for spec in &cfg.policies {
        for &n in &cfg.n_values {
            let mut sim = Simulation::new(cfg, spec, n, StreamKey::new(seed, 0))?;
            let mut elapsed = 0.0;
            for _ in 0..cfg.horizon {
                sim.begin_slot()?;
                let start = Instant::now();
                let sched = sim.decide();
                elapsed += start.elapsed().as_secs_f64();
                sim.finish_slot(&sched)?;
            }
            rows.push(BenchRow {
                policy: spec.to_string(),
                n,
                slots: cfg.horizon,
                micros_per_slot: if cfg.horizon == 0 { 0.0 } else { elapsed * 1e6 / cfg.horizon as f64 },
            });
        }
    }
    Ok(BenchReport { rows })
}
