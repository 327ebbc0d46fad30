//! Delay statistics, rate-function fits, the rate-function upper bound and
//! stability diagnostics.

use thiserror::Error;

use crate::sim::{Slot, SystemState};
use crate::traffic::{stationary_first, ArrivalModel, Transition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{name} = {value} is outside {range}")]
    Domain { name: &'static str, value: f64, range: &'static str },
    #[error("no closed-form cumulant generating function for {0}")]
    UnsupportedModel(String),
    #[error("arrival model has L = {model}, bound requested for L = {requested}")]
    BoundMismatch { model: u32, requested: u32 },
    #[error("cannot merge statistics with different thresholds")]
    ThresholdMismatch,
}

/// Per-run delay and backlog record.
///
/// `W(t)` is the largest HOL delay, observed after arrivals and before
/// service. The first `warmup` recorded slots are discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayStats {
    pub thresholds: Vec<u64>,
    pub warmup: u64,
    pub trace_stride: u64,
    /// Slots seen, warmup included.
    pub slots_seen: u64,
    /// Slots counted after warmup.
    pub measured: u64,
    /// Per threshold `b`: measured slots with `W > b`.
    pub exceed_counts: Vec<u64>,
    /// `(slot, total backlog)` every `trace_stride` measured slots.
    pub backlog_trace: Vec<(Slot, u64)>,
    pub max_w: u64,
}

impl DelayStats {
    pub fn new(thresholds: Vec<u64>, warmup: u64, trace_stride: u64) -> Self {
        let k = thresholds.len();
        Self {
            thresholds,
            warmup,
            trace_stride: trace_stride.max(1),
            slots_seen: 0,
            measured: 0,
            exceed_counts: vec![0; k],
            backlog_trace: Vec::new(),
            max_w: 0,
        }
    }

    pub fn record_slot(&mut self, state: &SystemState) {
        self.record(state.slot(), state.max_hol_delay(), state.backlog() as u64);
    }

    /// Same as [`record_slot`](Self::record_slot) from raw observations.
    pub fn record(&mut self, slot: Slot, w: u64, backlog: u64) {
        self.slots_seen += 1;
        if self.slots_seen <= self.warmup {
            return;
        }
        for (count, &b) in self.exceed_counts.iter_mut().zip(&self.thresholds) {
            if w > b {
                *count += 1;
            }
        }
        if self.measured.is_multiple_of(self.trace_stride) {
            self.backlog_trace.push((slot, backlog));
        }
        self.measured += 1;
        self.max_w = self.max_w.max(w);
    }

    /// Empirical `P(W > b)` per threshold; `None` before any measurement.
    pub fn p_hat(&self) -> Vec<Option<f64>> {
        self.exceed_counts.iter().map(|&c| (self.measured > 0).then(|| c as f64 / self.measured as f64)).collect()
    }

    /// Adds the counts of another replication. Backlog traces are not
    /// comparable across replications, so the merged trace is empty.
    pub fn merge(&mut self, other: &DelayStats) -> Result<(), AnalysisError> {
        if self.thresholds != other.thresholds {
            return Err(AnalysisError::ThresholdMismatch);
        }
        self.slots_seen += other.slots_seen;
        self.measured += other.measured;
        for (a, b) in self.exceed_counts.iter_mut().zip(&other.exceed_counts) {
            *a += b;
        }
        self.max_w = self.max_w.max(other.max_w);
        self.backlog_trace.clear();
        Ok(())
    }
}

/// Least-squares slope of `-ln P(W > b)` against `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub std_err: f64,
    pub intercept: f64,
    /// `n` values that entered the fit.
    pub used: Vec<usize>,
    /// `n` values with zero exceedances, left out.
    pub censored: Vec<usize>,
}

/// `points` are `(n, P̂)`; zero estimates are censored.
pub fn rate_function_estimate(points: &[(usize, f64)]) -> Result<RateFit, AnalysisError> {
    let (usable, zero): (Vec<_>, Vec<_>) = points.iter().partition(|&&(_, p)| p > 0.0);
    let censored = zero.iter().map(|&(n, _)| n).collect();
    let mut distinct: Vec<usize> = usable.iter().map(|&(n, _)| n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(AnalysisError::InsufficientData { needed: 3, got: distinct.len() });
    }
    let xs: Vec<f64> = usable.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, p)| -p.ln()).collect();
    let line = least_squares(&xs, &ys);
    Ok(RateFit {
        slope: line.slope,
        std_err: line.std_err,
        intercept: line.intercept,
        used: usable.iter().map(|&(n, _)| n).collect(),
        censored,
    })
}

struct Line {
    slope: f64,
    intercept: f64,
    std_err: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Line {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let std_err = if xs.len() > 2 && sxx > 0.0 { (ssr / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Line { slope, intercept, std_err }
}

/// Decay rate of a link staying OFF: `ln(1/(1-q))`.
pub fn compute_i_x(q: f64) -> Result<f64, AnalysisError> {
    if q > 0.0 && q < 1.0 {
        Ok(-(1.0 - q).ln())
    } else {
        Err(AnalysisError::Domain { name: "q", value: q, range: "(0, 1)" })
    }
}

/// Cumulant generating function of one user's arrivals over `t` slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalCgf {
    Bernoulli { p: f64 },
    MarkovBurst { batch: u32, p: Transition },
}

impl ArrivalCgf {
    pub fn for_model(model: &ArrivalModel) -> Result<Self, AnalysisError> {
        match *model {
            ArrivalModel::Bernoulli { p } => Ok(ArrivalCgf::Bernoulli { p }),
            ArrivalModel::MarkovBurst { batch, p } => Ok(ArrivalCgf::MarkovBurst { batch, p }),
            ArrivalModel::Counterexample { .. } => Err(AnalysisError::UnsupportedModel(model.to_string())),
        }
    }

    pub fn max_arrivals(&self) -> u32 {
        match self {
            ArrivalCgf::Bernoulli { .. } => 1,
            ArrivalCgf::MarkovBurst { batch, .. } => *batch,
        }
    }

    pub fn mean_rate(&self) -> f64 {
        match self {
            ArrivalCgf::Bernoulli { p } => *p,
            ArrivalCgf::MarkovBurst { batch, p } => *batch as f64 * stationary_first(p),
        }
    }

    /// `log E[exp(θ A(-t+1, 0))]` for `θ > 0`.
    pub fn eval(&self, t: u32, theta: f64) -> f64 {
        match *self {
            // t log(1 - p + p e^θ), written to stay finite for large θ.
            ArrivalCgf::Bernoulli { p } => {
                if p <= 0.0 {
                    0.0
                } else {
                    t as f64 * (theta + p.ln() + (1.0 + (1.0 - p) / p * (-theta).exp()).ln())
                }
            }
            ArrivalCgf::MarkovBurst { batch, p } => {
                // Factor out e^{θ·batch} per slot, so the tilted weights are
                // 1 (burst) and e^{-θ·batch} (idle); renormalise each step.
                let idle = (-theta * batch as f64).exp();
                let pi0 = stationary_first(&p);
                let mut v = [pi0, (1.0 - pi0) * idle];
                let mut log_scale = 0.0;
                for _ in 1..t {
                    let next = [v[0] * p[0][0] + v[1] * p[1][0], (v[0] * p[0][1] + v[1] * p[1][1]) * idle];
                    let s = next[0] + next[1];
                    log_scale += s.ln();
                    v = [next[0] / s, next[1] / s];
                }
                theta * batch as f64 * t as f64 + log_scale + (v[0] + v[1]).ln()
            }
        }
    }

    /// `-ln P(A(-t+1, 0) = L t)`, the limit of the Legendre transform at the
    /// top of the support.
    fn neg_log_max(&self, t: u32) -> f64 {
        match *self {
            ArrivalCgf::Bernoulli { p } => -(t as f64) * p.ln(),
            ArrivalCgf::MarkovBurst { p, .. } => -(stationary_first(&p).ln() + (t as f64 - 1.0) * p[0][0].ln()),
        }
    }
}

/// `I_A(t, x) = sup_{θ>0} [θ(t+x) - λ_t(θ)]`.
///
/// Zero when `t + x` is at or below the mean, `+∞` above the support
/// (`x > (L-1)t`). `x` may be negative down to `-t`.
pub fn compute_i_a(cgf: &ArrivalCgf, t: u32, x: f64) -> Result<f64, AnalysisError> {
    if t == 0 {
        return Err(AnalysisError::Domain { name: "t", value: 0.0, range: "positive integers" });
    }
    if x.is_nan() || x < -(t as f64) {
        return Err(AnalysisError::Domain { name: "x", value: x, range: "[-t, ∞)" });
    }
    let tf = t as f64;
    let level = tf + x;
    let top = cgf.max_arrivals() as f64 * tf;
    let tol = 1e-9 * top.max(1.0);
    if level > top + tol {
        return Ok(f64::INFINITY);
    }
    if level >= top - tol {
        return Ok(cgf.neg_log_max(t));
    }
    if level <= cgf.mean_rate() * tf {
        return Ok(0.0);
    }
    let f = |theta: f64| theta * level - cgf.eval(t, theta);
    // Coarse geometric scan, then golden-section inside the best bracket.
    let mut grid: Vec<f64> = (-40..=12).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let mut best = argmax(&grid, &f);
    while best + 1 == grid.len() {
        let last = *grid.last().expect("grid is nonempty");
        grid.push(last * 2.0);
        best = argmax(&grid, &f);
    }
    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = grid[best + 1];
    let theta = golden_max(&f, lo, hi);
    Ok(f(theta).max(f(grid[best])).max(0.0))
}

fn argmax(grid: &[f64], f: &impl Fn(f64) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (k, &g) in grid.iter().enumerate() {
        let v = f(g);
        if v > best_v {
            best_v = v;
            best = k;
        }
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub l: u32,
    pub q: f64,
    pub b: u64,
    /// Needed only for `L > 1`.
    pub arrivals: Option<ArrivalModel>,
    /// Truncation of the infimum over `t`.
    pub t_max: u32,
}

/// Which candidate of the three-way minimum attains the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundTerm {
    /// `(b+1) I_X`.
    AllOff,
    /// `I_A(t, b-c) + c I_X` with integer `t > (b-c)/(L-1)`.
    Burst { c: u64, t: u32 },
    /// `I_A(t, b-c) + (c+1) I_X` with `t = (b-c)/(L-1)` an integer.
    BoundaryBurst { c: u64, t: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    pub value: f64,
    pub i_x: f64,
    pub attained_by: BoundTerm,
    pub t_max: u32,
    /// Whether `I_A(t, b-c)` was nondecreasing over the last tenth of the
    /// `t` range for every `c`, i.e. the truncation looks safe.
    pub tail_monotone: bool,
}

pub fn compute_upper_bound(bp: &BoundParams) -> Result<UpperBound, AnalysisError> {
    let i_x = compute_i_x(bp.q)?;
    let all_off = (bp.b + 1) as f64 * i_x;
    if bp.l <= 1 {
        return Ok(UpperBound {
            value: all_off,
            i_x,
            attained_by: BoundTerm::AllOff,
            t_max: bp.t_max,
            tail_monotone: true,
        });
    }
    let model = bp.arrivals.ok_or_else(|| AnalysisError::UnsupportedModel("no arrival model given".into()))?;
    let cgf = ArrivalCgf::for_model(&model)?;
    if cgf.max_arrivals() != bp.l {
        return Err(AnalysisError::BoundMismatch { model: cgf.max_arrivals(), requested: bp.l });
    }
    if bp.t_max == 0 {
        return Err(AnalysisError::Domain { name: "t_max", value: 0.0, range: "positive integers" });
    }
    let mut best = (all_off, BoundTerm::AllOff);
    let mut tail_monotone = true;
    let lm1 = (bp.l - 1) as u64;
    for c in 0..=bp.b {
        let x = bp.b - c;
        let x_f = x as f64;
        // Smallest integer t > x / (L-1).
        let t_start = (x / lm1 + 1) as u32;
        let tail_from = bp.t_max - bp.t_max / 10;
        let mut prev_tail: Option<f64> = None;
        for t in t_start..=bp.t_max.max(t_start) {
            let v = compute_i_a(&cgf, t, x_f)? + c as f64 * i_x;
            if v < best.0 {
                best = (v, BoundTerm::Burst { c, t });
            }
            if t >= tail_from {
                if prev_tail.is_some_and(|p| v < p - 1e-9) {
                    tail_monotone = false;
                }
                prev_tail = Some(v);
            }
        }
        if x.is_multiple_of(lm1) && x > 0 {
            let t = (x / lm1) as u32;
            let v = compute_i_a(&cgf, t, x_f)? + (c + 1) as f64 * i_x;
            if v < best.0 {
                best = (v, BoundTerm::BoundaryBurst { c, t });
            }
        }
    }
    Ok(UpperBound { value: best.0, i_x, attained_by: best.1, t_max: bp.t_max, tail_monotone })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityThresholds {
    /// Drift above which a growing backlog is called unstable.
    pub eps_plus: f64,
    /// Backlog counted as "near zero".
    pub near_zero: u64,
    /// Near-zero samples needed to call the run stable.
    pub min_returns: usize,
    pub min_samples: usize,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self { eps_plus: 0.01, near_zero: 50, min_returns: 100, min_samples: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// Backlog drift in packets per slot.
    pub slope: f64,
    pub std_err: f64,
    pub returns: usize,
    pub verdict: Verdict,
}

/// Classifies a `(slot, backlog)` trace. Unstable needs the drift above
/// `eps_plus` by three standard errors; stable needs repeated visits near
/// zero.
pub fn stability_metric(trace: &[(Slot, u64)], th: &StabilityThresholds) -> Result<StabilityReport, AnalysisError> {
    if trace.len() < th.min_samples.max(3) {
        return Err(AnalysisError::InsufficientData { needed: th.min_samples.max(3), got: trace.len() });
    }
    let xs: Vec<f64> = trace.iter().map(|&(s, _)| s as f64).collect();
    let ys: Vec<f64> = trace.iter().map(|&(_, b)| b as f64).collect();
    let line = least_squares(&xs, &ys);
    let returns = trace.iter().filter(|&&(_, b)| b <= th.near_zero).count();
    let verdict = if line.slope > th.eps_plus && line.slope - 3.0 * line.std_err > 0.0 {
        Verdict::Unstable
    } else if returns >= th.min_returns {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityReport { slope: line.slope, std_err: line.std_err, returns, verdict })
}

/// Throughput region of the two-user system with i.i.d. ON/OFF links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputRegionN2 {
    pub q: f64,
}

impl ThroughputRegionN2 {
    pub fn contains(&self, l1: f64, l2: f64) -> bool {
        let q = self.q;
        l1 >= 0.0 && l2 >= 0.0 && l1 <= 2.0 * q && l2 <= 2.0 * q && l1 + l2 <= 2.0 * (2.0 * q - q * q)
    }
}

pub fn throughput_region_n2(q: f64) -> Result<ThroughputRegionN2, AnalysisError> {
    if q > 0.0 && q < 1.0 {
        Ok(ThroughputRegionN2 { q })
    } else {
        Err(AnalysisError::Domain { name: "q", value: q, range: "(0, 1)" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SystemParams;

    #[test]
    fn record_strict_threshold() {
        let mut st = DelayStats::new(vec![2, 3], 0, 1);
        st.record(0, 0, 0);
        st.record(1, 3, 1);
        assert_eq!(st.exceed_counts, vec![1, 0]);
        assert_eq!(st.measured, 2);
        assert_eq!(st.max_w, 3);
    }

    #[test]
    fn empty_system_never_exceeds() {
        let s = SystemState::new(SystemParams::new(2, 1).unwrap());
        let mut st = DelayStats::new(vec![0], 0, 1);
        st.record_slot(&s);
        assert_eq!(st.exceed_counts, vec![0]);
    }

    #[test]
    fn warmup_is_skipped() {
        let mut st = DelayStats::new(vec![0], 3, 2);
        for t in 0..10 {
            st.record(t, 5, t);
        }
        assert_eq!(st.measured, 7);
        assert_eq!(st.exceed_counts, vec![7]);
        assert_eq!(st.backlog_trace, vec![(3, 3), (5, 5), (7, 7), (9, 9)]);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = DelayStats::new(vec![1], 0, 1);
        a.record(0, 2, 0);
        let mut b = DelayStats::new(vec![1], 0, 1);
        b.record(0, 0, 0);
        a.merge(&b).unwrap();
        assert_eq!((a.measured, a.exceed_counts[0]), (2, 1));
        assert!(a.merge(&DelayStats::new(vec![2], 0, 1)).is_err());
    }

    #[test]
    fn exact_exponential_slope() {
        let pts: Vec<(usize, f64)> = (1..=6).map(|n| (n, (-0.3 * n as f64).exp())).collect();
        let fit = rate_function_estimate(&pts).unwrap();
        assert!((fit.slope - 0.3).abs() < 1e-12);
        let flat: Vec<(usize, f64)> = (1..=5).map(|n| (n, 0.1)).collect();
        assert!(rate_function_estimate(&flat).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn censored_points_are_excluded() {
        let fit = rate_function_estimate(&[(1, 0.5), (2, 0.25), (3, 0.125), (4, 0.0)]).unwrap();
        assert_eq!(fit.censored, vec![4]);
        assert!(matches!(
            rate_function_estimate(&[(1, 0.5), (2, 0.0), (3, 0.1)]),
            Err(AnalysisError::InsufficientData { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn i_x_values() {
        assert!((compute_i_x(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((compute_i_x(0.75).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(compute_i_x(1.0).is_err());
        assert!(compute_i_x(0.0).is_err());
    }

    #[test]
    fn i_a_bernoulli_top_of_support() {
        let cgf = ArrivalCgf::Bernoulli { p: 0.5 };
        assert!((compute_i_a(&cgf, 4, 0.0).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(compute_i_a(&cgf, 4, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(compute_i_a(&cgf, 4, -2.0).unwrap(), 0.0);
    }

    #[test]
    fn counterexample_has_no_cgf() {
        assert!(matches!(
            ArrivalCgf::for_model(&ArrivalModel::Counterexample { k: 8, p: 0.1 }),
            Err(AnalysisError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn upper_bound_l1() {
        let bp = BoundParams { l: 1, q: 0.75, b: 2, arrivals: None, t_max: 200 };
        let ub = compute_upper_bound(&bp).unwrap();
        assert!((ub.value - 3.0 * 4f64.ln()).abs() < 1e-12);
        let bp = BoundParams { l: 1, q: 0.5, b: 0, arrivals: None, t_max: 200 };
        assert!((compute_upper_bound(&bp).unwrap().value - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn stability_examples() {
        let growing: Vec<(Slot, u64)> = (0..1000).map(|t| (t, t / 10)).collect();
        let r = stability_metric(&growing, &StabilityThresholds::default()).unwrap();
        assert!((r.slope - 0.1).abs() < 1e-3);
        assert_eq!(r.verdict, Verdict::Unstable);
        let zero: Vec<(Slot, u64)> = (0..1000).map(|t| (t, 0)).collect();
        assert_eq!(stability_metric(&zero, &StabilityThresholds::default()).unwrap().verdict, Verdict::Stable);
        assert!(stability_metric(&zero[..50], &StabilityThresholds::default()).is_err());
    }

    #[test]
    fn region_examples() {
        let r = throughput_region_n2(0.5).unwrap();
        assert!(r.contains(17.0 / 24.0, 17.0 / 24.0));
        assert!(r.contains(0.0, 0.0));
        assert!(!r.contains(1.1, 0.5));
        assert!(throughput_region_n2(1.0).is_err());
    }
}
