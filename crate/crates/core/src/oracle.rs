//! Exhaustive reference computations used by the test suites.
//!
//! Everything here enumerates; nothing calls into the matching kernels or
//! the policies, so these results are independent of the code they check.

use std::collections::HashSet;

use crate::matching::BipartiteGraph;
use crate::sim::{ConnectivityMatrix, Packet, SystemState};

/// Calls `visit` with every matching of `g` (including the empty one).
pub fn for_each_matching(g: &BipartiteGraph, mut visit: impl FnMut(&[(usize, usize)])) {
    let mut used = vec![false; g.right_count()];
    let mut current = Vec::new();
    rec(g, 0, &mut used, &mut current, &mut visit);

    fn rec(
        g: &BipartiteGraph,
        left: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        visit: &mut impl FnMut(&[(usize, usize)]),
    ) {
        if left == g.left_count() {
            visit(current);
            return;
        }
        rec(g, left + 1, used, current, visit);
        for &r in g.neighbors(left) {
            if !used[r] {
                used[r] = true;
                current.push((left, r));
                rec(g, left + 1, used, current, visit);
                current.pop();
                used[r] = false;
            }
        }
    }
}

pub fn max_cardinality(g: &BipartiteGraph) -> usize {
    let mut best = 0;
    for_each_matching(g, |m| best = best.max(m.len()));
    best
}

pub fn max_left_weight(g: &BipartiteGraph, weights: &[u64]) -> u64 {
    let mut best = 0;
    for_each_matching(g, |m| best = best.max(m.iter().map(|&(l, _)| weights[l]).sum()));
    best
}

/// `edge_weight(l, r)` must return the weight of an existing edge.
pub fn max_edge_weight(g: &BipartiteGraph, edge_weight: impl Fn(usize, usize) -> u64) -> u64 {
    let mut best = 0;
    for_each_matching(g, |m| best = best.max(m.iter().map(|&(l, r)| edge_weight(l, r)).sum()));
    best
}

/// For every subset of left vertices (as a bitmask), whether some matching
/// saturates all of them. Needs `left_count <= 16`.
pub fn saturable_subsets(g: &BipartiteGraph) -> Vec<bool> {
    let l = g.left_count();
    assert!(l <= 16);
    let mut covered = vec![false; 1 << l];
    for_each_matching(g, |m| {
        let mask = m.iter().fold(0usize, |acc, &(left, _)| acc | (1 << left));
        covered[mask] = true;
    });
    // Close downwards: any subset of a saturated set is saturable.
    for mask in (0..(1usize << l)).rev() {
        if covered[mask] {
            for bit in 0..l {
                if mask & (1 << bit) != 0 {
                    covered[mask & !(1 << bit)] = true;
                }
            }
        }
    }
    covered
}

/// Hall's condition over all left subsets.
pub fn hall_condition(g: &BipartiteGraph) -> bool {
    let l = g.left_count();
    (0..(1usize << l)).all(|mask| {
        let mut nbrs = HashSet::new();
        for left in 0..l {
            if mask & (1 << left) != 0 {
                nbrs.extend(g.neighbors(left).iter().copied());
            }
        }
        nbrs.len() >= mask.count_ones() as usize
    })
}

/// All packets in the system sorted by weight, heaviest first.
pub fn packets_by_weight(state: &SystemState) -> Vec<Packet> {
    let mut all: Vec<Packet> = state.packets().copied().collect();
    all.sort_by_key(|p| std::cmp::Reverse(state.weight(p)));
    all
}

/// Calls `visit` with the packet set of every feasible schedule: each server
/// sends at most one packet from a connected queue, each packet at most once.
pub fn for_each_feasible_service(state: &SystemState, conn: &ConnectivityMatrix, mut visit: impl FnMut(&[Packet])) {
    let packets: Vec<Packet> = state.packets().copied().collect();
    let mut used = vec![false; packets.len()];
    let mut current = Vec::new();
    rec(&packets, conn, 0, &mut used, &mut current, &mut visit);

    fn rec(
        packets: &[Packet],
        conn: &ConnectivityMatrix,
        server: usize,
        used: &mut [bool],
        current: &mut Vec<Packet>,
        visit: &mut impl FnMut(&[Packet]),
    ) {
        if server == conn.n() {
            visit(current);
            return;
        }
        rec(packets, conn, server + 1, used, current, visit);
        for (k, p) in packets.iter().enumerate() {
            if !used[k] && conn.get(p.queue, server) {
                used[k] = true;
                current.push(*p);
                rec(packets, conn, server + 1, used, current, visit);
                current.pop();
                used[k] = false;
            }
        }
    }
}

/// Largest `k` such that the `k` heaviest packets can be served together.
pub fn opf_prefix_len(state: &SystemState, conn: &ConnectivityMatrix) -> usize {
    let order = packets_by_weight(state);
    let mut best = 0;
    for_each_feasible_service(state, conn, |served| {
        let ids: HashSet<u64> = served.iter().map(|p| p.seq_id).collect();
        let k = order.iter().take_while(|p| ids.contains(&p.seq_id)).count();
        best = best.max(k);
    });
    best
}

/// Maximum total weight over all feasible schedules.
pub fn max_service_weight(state: &SystemState, conn: &ConnectivityMatrix) -> u64 {
    let mut best = 0;
    for_each_feasible_service(state, conn, |served| {
        best = best.max(served.iter().map(|p| state.weight(p).0).sum());
    });
    best
}
