use mcsched::analysis::{
    compute_i_a, compute_upper_bound, rate_function_estimate, ArrivalCgf, BoundParams, BoundTerm, DelayStats,
};
use mcsched::traffic::ArrivalModel;
use mcsched::{ConnectivityMatrix, SystemParams, SystemState};

const PAPER_BURST: [[f64; 2]; 2] = [[0.5, 0.5], [0.1, 0.9]];

/// Binomial Legendre transform: `t · D(a ‖ p)` at `a = (t + x)/t`.
fn bernoulli_rate(p: f64, t: u32, x: f64) -> f64 {
    let a = (t as f64 + x) / t as f64;
    t as f64 * (a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln())
}

/// Exact law of a burst user's arrivals over `t` slots as
/// `(number of burst slots, probability)`, by enumerating state paths.
fn burst_law(p: &[[f64; 2]; 2], t: u32) -> Vec<f64> {
    let pi0 = p[1][0] / (p[0][1] + p[1][0]);
    let mut law = vec![0.0; t as usize + 1];
    for path in 0u32..(1 << t) {
        let state = |k: u32| ((path >> k) & 1) as usize; // 0 = burst
        let mut prob = if state(0) == 0 { pi0 } else { 1.0 - pi0 };
        for k in 1..t {
            prob *= p[state(k - 1)][state(k)];
        }
        let bursts = (0..t).filter(|&k| state(k) == 0).count();
        law[bursts] += prob;
    }
    law
}

/// `sup_θ [θ·level − log E e^{θA}]` by dense scan then ternary refinement.
fn legendre(law: &[f64], step: f64, level: f64) -> f64 {
    let f = |theta: f64| {
        let m: f64 = law.iter().enumerate().map(|(k, &pk)| pk * (theta * (k as f64 * step - level)).exp()).sum();
        -m.ln()
    };
    let (mut best, mut arg) = (0.0f64, 0.0);
    for k in 1..4000 {
        let theta = k as f64 * 0.005;
        let v = f(theta);
        if v > best {
            best = v;
            arg = theta;
        }
    }
    let (mut a, mut b) = ((arg - 0.005f64).max(0.0), arg + 0.005);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    best.max(f((a + b) / 2.0))
}

#[test]
fn bernoulli_i_a_matches_closed_form() {
    let cgf = ArrivalCgf::Bernoulli { p: 0.5 };
    let got = compute_i_a(&cgf, 4, 0.0).unwrap();
    assert!((got - 4.0 * 2f64.ln()).abs() < 1e-6);
    for &(p, t, x) in &[(0.3, 5, -1.0), (0.5, 4, -1.5), (0.8, 10, -1.0), (0.1, 3, -2.5)] {
        let cgf = ArrivalCgf::Bernoulli { p };
        let got = compute_i_a(&cgf, t, x).unwrap();
        assert!((got - bernoulli_rate(p, t, x)).abs() < 1e-6, "p={p} t={t} x={x}: {got}");
    }
}

#[test]
fn i_a_vanishes_at_the_mean() {
    let cgf = ArrivalCgf::Bernoulli { p: 0.4 };
    assert_eq!(compute_i_a(&cgf, 5, 0.4 * 5.0 - 5.0).unwrap(), 0.0);
    let burst = ArrivalCgf::MarkovBurst { batch: 5, p: PAPER_BURST };
    let t = 6;
    assert_eq!(compute_i_a(&burst, t, 5.0 / 6.0 * t as f64 - t as f64).unwrap(), 0.0);
}

#[test]
fn burst_i_a_matches_path_enumeration() {
    let cgf = ArrivalCgf::MarkovBurst { batch: 5, p: PAPER_BURST };
    for t in 1..=8u32 {
        let law = burst_law(&PAPER_BURST, t);
        for x in [0.0, 0.5, 1.0, 2.0, 3.0] {
            if x >= 4.0 * t as f64 {
                continue;
            }
            let want = legendre(&law, 5.0, t as f64 + x);
            let got = compute_i_a(&cgf, t, x).unwrap();
            assert!((got - want).abs() < 1e-6, "t={t} x={x}: {got} vs {want}");
        }
        // Top of the support: every slot in burst.
        let top = compute_i_a(&cgf, t, 4.0 * t as f64).unwrap();
        assert!((top + law[t as usize].ln()).abs() < 1e-9);
        assert_eq!(compute_i_a(&cgf, t, 4.0 * t as f64 + 0.1).unwrap(), f64::INFINITY);
    }
}

#[test]
fn i_a_is_monotone_and_convex_in_x() {
    let cgf = ArrivalCgf::MarkovBurst { batch: 5, p: PAPER_BURST };
    let t = 3;
    let xs: Vec<f64> = (0..120).map(|k| k as f64 * 0.1).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| compute_i_a(&cgf, t, x).unwrap()).collect();
    for w in vals.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }
    for w in vals.windows(3) {
        assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-7);
    }
}

/// Bound for the burst model by brute force over `(c, t, θ)`.
fn brute_force_bound(q: f64, b: u64, t_max: u32) -> f64 {
    let i_x = (1.0 / (1.0 - q)).ln();
    let l = 5u64;
    let mut best = (b + 1) as f64 * i_x;
    for c in 0..=b {
        let x = (b - c) as f64;
        for t in 1..=t_max {
            let law = dp_law(&PAPER_BURST, t);
            let above = x < ((l - 1) * t as u64) as f64;
            let at = x == ((l - 1) * t as u64) as f64;
            if above {
                best = best.min(legendre(&law, 5.0, t as f64 + x) + c as f64 * i_x);
            }
            if at {
                best = best.min(-law[t as usize].ln() + (c + 1) as f64 * i_x);
            }
        }
    }
    best
}

/// Same law as `burst_law` by forward recursion, for larger `t`.
fn dp_law(p: &[[f64; 2]; 2], t: u32) -> Vec<f64> {
    let pi0 = p[1][0] / (p[0][1] + p[1][0]);
    // dist[s][k]: in state s after k bursts.
    let mut dist = [vec![0.0; t as usize + 2], vec![0.0; t as usize + 2]];
    dist[0][1] = pi0;
    dist[1][0] = 1.0 - pi0;
    for _ in 1..t {
        let mut next = [vec![0.0; t as usize + 2], vec![0.0; t as usize + 2]];
        for k in 0..=t as usize {
            for s in 0..2 {
                let m = dist[s][k];
                next[0][k + 1] += m * p[s][0];
                next[1][k] += m * p[s][1];
            }
        }
        dist = next;
    }
    (0..=t as usize).map(|k| dist[0][k] + dist[1][k]).collect()
}

#[test]
fn burst_upper_bound_matches_brute_force() {
    for (q, b) in [(0.75, 2u64), (0.5, 1), (0.75, 4)] {
        let bp = BoundParams {
            l: 5,
            q,
            b,
            arrivals: Some(ArrivalModel::MarkovBurst { batch: 5, p: PAPER_BURST }),
            t_max: 200,
        };
        let ub = compute_upper_bound(&bp).unwrap();
        let want = brute_force_bound(q, b, 40);
        assert!((ub.value - want).abs() < 1e-6, "q={q} b={b}: {} vs {want} ({:?})", ub.value, ub.attained_by);
        assert!(ub.tail_monotone);
        assert!(ub.value <= (b + 1) as f64 * ub.i_x + 1e-12);
        if let BoundTerm::Burst { t, .. } | BoundTerm::BoundaryBurst { t, .. } = ub.attained_by {
            assert!(t <= 40);
        }
    }
}

#[test]
fn synthetic_polynomial_prefactor_slope() {
    let pts: Vec<(usize, f64)> =
        (20..=100).step_by(10).map(|n| (n, (n * n) as f64 * (-0.5 * n as f64).exp())).collect();
    let fit = rate_function_estimate(&pts).unwrap();
    assert!((fit.slope - 0.5).abs() < 0.05, "slope {}", fit.slope);
}

#[test]
fn record_slot_hand_counted_trace() {
    // n = 2, L = 1. Arrivals per slot and the queue served (if any) on a
    // single always-on link from queue 0 and 1 to server 0.
    let arrivals = [[1, 0], [0, 1], [0, 0], [1, 1], [0, 0], [0, 0], [0, 0], [1, 0], [0, 0], [0, 0]];
    let serve = [None, None, Some(0), None, None, Some(1), Some(0), None, Some(0), Some(0)];
    // W(t) after arrivals, before service, by hand:
    // t0: q0 has p0 (age 0) -> 0
    // t1: p0 age 1, q1 p1 age 0 -> 1
    // t2: p0 age 2 -> 2, serve q0 -> q0 empty
    // t3: q0 p3 age 0, q1 p1 age 2, q1 p3' age 0 -> 2
    // t4: p1 age 3 -> 3
    // t5: 4, serve q1 head (p1)
    // t6: q0 p3 age 3, q1 p3' age 3 -> 3, serve q0
    // t7: q0 new age 0, q1 p3' age 4 -> 4
    // t8: 5, serve q0
    // t9: q1 p3' age 6 -> 6, serve q0 (empty, nothing)
    let want_w = [0, 1, 2, 2, 3, 4, 3, 4, 5, 6];
    let mut s = SystemState::new(SystemParams::new(2, 1).unwrap());
    let mut stats = DelayStats::new(vec![1, 3, 5], 0, 1);
    let conn = ConnectivityMatrix::full(2);
    for t in 0..10 {
        s.apply_arrivals(&arrivals[t]).unwrap();
        assert_eq!(s.max_hol_delay(), want_w[t], "slot {t}");
        stats.record_slot(&s);
        if let Some(i) = serve[t] {
            if let Some(p) = s.queue(i).front().copied() {
                let mut sched = mcsched::Schedule::empty(2);
                sched.assign(0, i, p.seq_id).unwrap();
                sched.validate(&s, &conn).unwrap();
                s.apply_schedule(&sched).unwrap();
            }
        }
        s.advance_slot();
    }
    // W > 1: 8 slots; W > 3: 4 slots (4,4,5,6); W > 5: 1 slot.
    assert_eq!(stats.exceed_counts, vec![8, 4, 1]);
    assert_eq!(stats.max_w, 6);
}
