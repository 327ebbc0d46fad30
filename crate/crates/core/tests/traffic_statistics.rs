use mcsched::traffic::{stationary_first, ArrivalGenerator, ArrivalModel, ChannelGenerator, ChannelModel, StreamKey};
use mcsched::ConnectivityMatrix;

const PAPER_BURST: [[f64; 2]; 2] = [[0.5, 0.5], [0.1, 0.9]];
const NEAR: [[f64; 2]; 2] = [[0.833, 0.167], [0.5, 0.5]];
const FAR: [[f64; 2]; 2] = [[0.5, 0.5], [0.167, 0.833]];

/// Stationary probability of state 0 from the balance equation
/// `π0 P01 = π1 P10`, solved independently of the library helper.
fn balance(p: &[[f64; 2]; 2]) -> f64 {
    let ratio = p[0][1] / p[1][0];
    1.0 / (1.0 + ratio)
}

#[test]
fn burst_arrival_rate() {
    let pi = balance(&PAPER_BURST);
    assert!((pi - 1.0 / 6.0).abs() < 1e-12);
    assert!((stationary_first(&PAPER_BURST) - pi).abs() < 1e-12);
    let model = ArrivalModel::MarkovBurst { batch: 5, p: PAPER_BURST };
    let mut g = ArrivalGenerator::new(model, 1, StreamKey::new(11, 0)).unwrap();
    let slots = 1_000_000u64;
    let mut out = [0u32];
    let mut total = 0u64;
    for _ in 0..slots {
        g.next_slot(&mut out);
        assert!(out[0] == 0 || out[0] == 5);
        total += out[0] as u64;
    }
    let rate = total as f64 / slots as f64;
    let want = 5.0 * pi;
    assert!((rate - want).abs() / want < 0.01, "rate {rate} vs {want}");
}

#[test]
fn bernoulli_rate_within_three_standard_errors() {
    let p = 0.3;
    let mut g = ArrivalGenerator::new(ArrivalModel::Bernoulli { p }, 4, StreamKey::new(5, 1)).unwrap();
    let slots = 250_000u64;
    let mut out = [0u32; 4];
    let mut total = 0u64;
    for _ in 0..slots {
        g.next_slot(&mut out);
        total += out.iter().map(|&c| c as u64).sum::<u64>();
    }
    let m = (slots * 4) as f64;
    let se = (p * (1.0 - p) / m).sqrt();
    assert!((total as f64 / m - p).abs() < 3.0 * se);
}

#[test]
fn counterexample_rate() {
    let (k, p) = (8u32, 17.0 / 96.0);
    let model = ArrivalModel::Counterexample { k, p };
    let mut g = ArrivalGenerator::new(model, 2, StreamKey::new(3, 0)).unwrap();
    let slots = 1_000_000u64;
    let mut out = [0u32; 2];
    let mut totals = [0u64; 2];
    for _ in 0..slots {
        g.next_slot(&mut out);
        assert!(out[0] == 0 || out[1] == 0);
        totals[0] += out[0] as u64;
        totals[1] += out[1] as u64;
    }
    let want = 17.0 / 24.0;
    // Per queue: K·Bernoulli(p) per 2-slot frame.
    let frames = (slots / 2) as f64;
    let se = k as f64 * (p * (1.0 - p) / frames).sqrt() / 2.0;
    for t in totals {
        assert!((t as f64 / slots as f64 - want).abs() < 3.0 * se);
    }
    assert_eq!(totals[0], totals[1]);
}

#[test]
fn iid_channel_frequency() {
    let mut g = ChannelGenerator::new(ChannelModel::Iid { q: 0.75 }, 1, StreamKey::new(9, 0)).unwrap();
    let mut c = ConnectivityMatrix::disconnected(1);
    let draws = 100_000;
    let mut on = 0;
    for _ in 0..draws {
        g.next_slot(&mut c);
        on += c.get(0, 0) as u32;
    }
    assert!((on as f64 / draws as f64 - 0.75).abs() < 0.01);
}

#[test]
fn gilbert_elliott_frequencies() {
    let near_on = balance(&NEAR);
    assert!((near_on - 0.7496).abs() < 1e-4);
    let far_on = balance(&FAR);
    let model = ChannelModel::GilbertElliott { near: NEAR, far: FAR };
    let n = 2;
    let mut g = ChannelGenerator::new(model, n, StreamKey::new(21, 0)).unwrap();
    let mut c = ConnectivityMatrix::disconnected(n);
    let slots = 1_000_000u64;
    let mut on = [0u64; 2];
    for _ in 0..slots {
        g.next_slot(&mut c);
        for (i, o) in on.iter_mut().enumerate() {
            *o += (0..n).filter(|&j| c.get(i, j)).count() as u64;
        }
    }
    let total = (slots * n as u64) as f64;
    // Queue 0 is a near user (first user counting from 1), queue 1 is far.
    assert!((on[0] as f64 / total - near_on).abs() / near_on < 0.01);
    assert!((on[1] as f64 / total - far_on).abs() / far_on < 0.01);
}

#[test]
fn arrivals_never_exceed_bound() {
    let models = [
        ArrivalModel::Bernoulli { p: 0.9 },
        ArrivalModel::MarkovBurst { batch: 3, p: PAPER_BURST },
        ArrivalModel::Counterexample { k: 4, p: 0.7 },
    ];
    for model in models {
        let n = if matches!(model, ArrivalModel::Counterexample { .. }) { 2 } else { 5 };
        let mut g = ArrivalGenerator::new(model, n, StreamKey::new(1, 1)).unwrap();
        let mut out = vec![0; n];
        for _ in 0..10_000 {
            g.next_slot(&mut out);
            assert!(out.iter().all(|&c| c <= model.max_arrivals()));
        }
    }
}

#[test]
fn traces_depend_only_on_seed_and_replication() {
    let model = ChannelModel::GilbertElliott { near: NEAR, far: FAR };
    let trace = |seed, rep| {
        let mut g = ChannelGenerator::new(model, 3, StreamKey::new(seed, rep)).unwrap();
        let mut c = ConnectivityMatrix::disconnected(3);
        (0..100)
            .map(|_| {
                g.next_slot(&mut c);
                c.clone()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(trace(4, 0), trace(4, 0));
    assert_ne!(trace(4, 0), trace(4, 1));
    assert_ne!(trace(4, 0), trace(5, 0));
}
