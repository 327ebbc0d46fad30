//! Slot-by-slot checks of simulated runs: OPF, MWF and cumulative
//! dominance of OPF policies over FBS and perfect-matching.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use mcsched::policies::{mwf_condition_check, opf_condition_check, PolicySpec};
use mcsched::traffic::StreamKey;
use mcsched::PacketId;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::runner::{RunError, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Opf,
    Mwf,
    Dominance,
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opf" => Ok(Check::Opf),
            "mwf" => Ok(Check::Mwf),
            "dominance" => Ok(Check::Dominance),
            _ => Err(format!("unknown check `{s}` (expected opf, mwf or dominance)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub label: String,
    pub n: usize,
    pub violations: u64,
    pub slots: u64,
    pub first_violation: Option<u64>,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} n={}: {} violations / {} slots", self.label, self.n, self.violations, self.slots)?;
        if let Some(s) = self.first_violation {
            write!(f, " (first at slot {s})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn violations(&self) -> u64 {
        self.lines.iter().map(|l| l.violations).sum()
    }

    pub fn slots(&self) -> u64 {
        self.lines.iter().map(|l| l.slots).sum()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        write!(f, "{} violations / {} slots", self.violations(), self.slots())
    }
}

/// Runs the check over every `(policy, n, seed, replication)` of `cfg`.
/// `m` is the MWF threshold (default `n`).
pub fn verify(cfg: &ExperimentConfig, check: Check, m: Option<usize>) -> Result<VerifyReport, RunError> {
    let mut jobs = Vec::new();
    for &n in &cfg.n_values {
        for &seed in &cfg.seeds {
            for rep in 0..cfg.replications {
                jobs.push((n, StreamKey::new(seed, rep)));
            }
        }
    }
    let per_job: Vec<Vec<CheckLine>> = jobs
        .into_par_iter()
        .map(|(n, key)| match check {
            Check::Opf | Check::Mwf => cfg
                .policies
                .iter()
                .map(|spec| condition_run(cfg, spec, n, key, check, m.unwrap_or(n)))
                .collect::<Result<Vec<_>, _>>(),
            Check::Dominance => dominance_run(cfg, n, key),
        })
        .collect::<Result<_, _>>()?;

    // Pool seeds and replications per (label, n), keeping config order.
    let mut lines: Vec<CheckLine> = Vec::new();
    for line in per_job.into_iter().flatten() {
        match lines.iter_mut().find(|l| l.label == line.label && l.n == line.n) {
            Some(l) => {
                l.violations += line.violations;
                l.slots += line.slots;
                l.first_violation = l.first_violation.or(line.first_violation);
            }
            None => lines.push(line),
        }
    }
    Ok(VerifyReport { lines })
}

fn condition_run(
    cfg: &ExperimentConfig,
    spec: &PolicySpec,
    n: usize,
    key: StreamKey,
    check: Check,
    m: usize,
) -> Result<CheckLine, RunError> {
    let mut sim = Simulation::new(cfg, spec, n, key)?;
    let mut line =
        CheckLine { label: format!("{spec} {}", check_name(check)), n, violations: 0, slots: 0, first_violation: None };
    for _ in 0..cfg.horizon {
        sim.begin_slot()?;
        let sched = sim.decide();
        let ok = match check {
            Check::Opf => opf_condition_check(&sim.state, &sim.conn, &sched),
            _ => mwf_condition_check(&sim.state, &sim.conn, &sched, m),
        };
        if !ok {
            line.violations += 1;
            line.first_violation.get_or_insert(sim.state.slot());
        }
        line.slots += 1;
        sim.finish_slot(&sched)?;
    }
    Ok(line)
}

fn check_name(check: Check) -> &'static str {
    match check {
        Check::Opf => "opf",
        Check::Mwf => "mwf",
        Check::Dominance => "dominance",
    }
}

/// Packets served by one run but not (yet) by the other.
#[derive(Default)]
struct Difference {
    only_upper: HashSet<PacketId>,
    only_lower: HashSet<PacketId>,
}

impl Difference {
    fn served_by_upper(&mut self, id: PacketId) {
        if !self.only_lower.remove(&id) {
            self.only_upper.insert(id);
        }
    }

    fn served_by_lower(&mut self, id: PacketId) {
        if !self.only_upper.remove(&id) {
            self.only_lower.insert(id);
        }
    }
}

/// Lockstep runs of every policy on shared traces. For each pair (OPF
/// policy, FBS or perfect-matching analysis variant) a slot is a violation
/// if the lower policy has by then served a packet the OPF policy has not.
fn dominance_run(cfg: &ExperimentConfig, n: usize, key: StreamKey) -> Result<Vec<CheckLine>, RunError> {
    let uppers: Vec<PolicySpec> = cfg.opf_policies().copied().collect();
    let lowers: Vec<PolicySpec> = cfg.dominated_policies().copied().collect();
    let mut up_sims = uppers.iter().map(|s| Simulation::new(cfg, s, n, key)).collect::<Result<Vec<_>, _>>()?;
    let mut low_sims = lowers.iter().map(|s| Simulation::new(cfg, s, n, key)).collect::<Result<Vec<_>, _>>()?;
    let mut diffs: Vec<Vec<Difference>> =
        uppers.iter().map(|_| lowers.iter().map(|_| Difference::default()).collect()).collect();
    let mut lines: Vec<Vec<CheckLine>> = uppers
        .iter()
        .map(|u| {
            lowers
                .iter()
                .map(|l| CheckLine { label: format!("{u} >= {l}"), n, violations: 0, slots: 0, first_violation: None })
                .collect()
        })
        .collect();
    for _ in 0..cfg.horizon {
        let mut step = |sim: &mut Simulation| -> Result<(u64, Vec<PacketId>), RunError> {
            sim.begin_slot()?;
            let slot = sim.state.slot();
            let sched = sim.decide();
            Ok((slot, sim.finish_slot(&sched)?.iter().map(|p| p.id()).collect()))
        };
        let up_served = up_sims.iter_mut().map(&mut step).collect::<Result<Vec<_>, _>>()?;
        let low_served = low_sims.iter_mut().map(&mut step).collect::<Result<Vec<_>, _>>()?;
        for (u, (slot, ups)) in up_served.iter().enumerate() {
            for (l, (_, lows)) in low_served.iter().enumerate() {
                let d = &mut diffs[u][l];
                ups.iter().for_each(|&id| d.served_by_upper(id));
                lows.iter().for_each(|&id| d.served_by_lower(id));
                let line = &mut lines[u][l];
                line.slots += 1;
                if !d.only_lower.is_empty() {
                    line.violations += 1;
                    line.first_violation.get_or_insert(*slot);
                }
            }
        }
    }
    Ok(lines.into_iter().flatten().collect())
}
