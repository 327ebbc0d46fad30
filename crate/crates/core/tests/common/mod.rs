#![allow(dead_code)]

use mcsched::policies::dmws_schedule;
use mcsched::{ConnectivityMatrix, SystemParams, SystemState};
use proptest::prelude::*;

/// Plays `arrivals` slot by slot; after slot `k` (except the last) the
/// state is thinned by a D-MWS schedule on full connectivity when
/// `thin[k]` is set. The returned state is at the last slot, after its
/// arrivals.
pub fn build_state(n: usize, l: u32, arrivals: &[Vec<u32>], thin: &[bool]) -> SystemState {
    let mut s = SystemState::new(SystemParams::new(n, l).unwrap());
    let full = ConnectivityMatrix::full(n);
    for (k, counts) in arrivals.iter().enumerate() {
        let counts: Vec<u32> = (0..n).map(|i| counts.get(i).copied().unwrap_or(0).min(l)).collect();
        s.apply_arrivals(&counts).unwrap();
        if k + 1 < arrivals.len() {
            if thin.get(k).copied().unwrap_or(false) {
                let sched = dmws_schedule(&s, &full);
                s.apply_schedule(&sched).unwrap();
            }
            s.advance_slot();
        }
    }
    s
}

pub fn conn_from_bits(n: usize, bits: &[bool]) -> ConnectivityMatrix {
    let mut c = ConnectivityMatrix::disconnected(n);
    for i in 0..n {
        for j in 0..n {
            c.set(i, j, bits[i * n + j]);
        }
    }
    c
}

/// A small random system: `(state, connectivity)` with at most
/// `max_packets` packets so that exhaustive oracles stay cheap.
pub fn small_system(
    max_n: usize,
    max_l: u32,
    max_slots: usize,
    max_packets: usize,
) -> impl Strategy<Value = (SystemState, ConnectivityMatrix)> {
    (1..=max_n, 1..=max_l).prop_flat_map(move |(n, l)| {
        (
            prop::collection::vec(prop::collection::vec(0..=l, n), 1..=max_slots),
            prop::collection::vec(any::<bool>(), max_slots),
            prop::collection::vec(prop::bool::weighted(0.6), n * n),
        )
            .prop_map(move |(arrivals, thin, bits)| {
                let mut s = build_state(n, l, &arrivals, &thin);
                // Trim from the tail of the longest queues to respect the budget.
                while s.backlog() > max_packets {
                    let longest = (0..n).max_by_key(|&i| s.queue_len(i)).unwrap();
                    let last = *s.queue(longest).back().unwrap();
                    let mut sched = mcsched::Schedule::empty(n);
                    sched.assign(0, longest, last.seq_id).unwrap();
                    s.apply_schedule(&sched).unwrap();
                }
                (s, conn_from_bits(n, &bits))
            })
    })
}
