//! Per-server greedy rules: D-MWS, the DWM-n-MWS hybrid, Q-SSG and Q-MWS.

use std::collections::HashSet;

use super::dwm::dwmn_schedule;
use crate::sim::{ConnectivityMatrix, Packet, Schedule, SystemState};

/// Packets still available to a greedy stage. `excluded` packets (already
/// served by an earlier stage) are skipped; claims advance a per-queue cursor.
struct Residual<'a> {
    state: &'a SystemState,
    excluded: &'a HashSet<u64>,
    excluded_per_queue: Vec<usize>,
    cursor: Vec<usize>,
    claimed: Vec<usize>,
}

impl<'a> Residual<'a> {
    fn new(state: &'a SystemState, excluded: &'a HashSet<u64>, excluded_per_queue: Vec<usize>) -> Self {
        let n = state.n();
        Self { state, excluded, excluded_per_queue, cursor: vec![0; n], claimed: vec![0; n] }
    }

    fn full(state: &'a SystemState) -> Self {
        static NOTHING: std::sync::OnceLock<HashSet<u64>> = std::sync::OnceLock::new();
        Self::new(state, NOTHING.get_or_init(HashSet::new), vec![0; state.n()])
    }

    fn len(&self, i: usize) -> usize {
        self.state.queue_len(i) - self.excluded_per_queue[i]
    }

    fn unclaimed(&self, i: usize) -> usize {
        self.len(i) - self.claimed[i]
    }

    fn head(&self, i: usize) -> Option<&'a Packet> {
        self.state.queue(i).iter().find(|p| !self.excluded.contains(&p.seq_id))
    }

    fn claim(&mut self, i: usize) -> Option<&'a Packet> {
        let q = self.state.queue(i);
        while let Some(p) = q.get(self.cursor[i]) {
            self.cursor[i] += 1;
            if !self.excluded.contains(&p.seq_id) {
                self.claimed[i] += 1;
                return Some(p);
            }
        }
        None
    }
}

/// Largest `key` among connected queues with `Some` key; lowest index on ties.
fn pick(conn: &ConnectivityMatrix, server: usize, key: impl Fn(usize) -> Option<u64>) -> Option<usize> {
    let mut best: Option<(u64, usize)> = None;
    for i in conn.queues_of(server) {
        if let Some(k) = key(i) {
            if best.is_none_or(|(bk, _)| k > bk) {
                best = Some((k, i));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Allocates `server` to queue `i` and hands it the next unclaimed packet;
/// with none left the server is allocated without a packet.
fn take(sched: &mut Schedule, residual: &mut Residual<'_>, server: usize, i: usize) {
    match residual.claim(i) {
        Some(p) => sched.assign(server, i, p.seq_id),
        None => sched.allocate_idle(server, i),
    }
    .expect("each server is handled once");
}

/// Delay-based MaxWeight: every server independently picks the connected
/// nonempty queue with the largest HOL delay (lowest index on ties). A
/// queue chosen by `m` servers sends its first `m` packets.
pub fn dmws_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let mut sched = Schedule::empty(state.n());
    let mut residual = Residual::full(state);
    let slot = state.slot();
    for j in 0..state.n() {
        if let Some(i) = pick(conn, j, |i| state.queue(i).front().map(|p| p.age(slot))) {
            take(&mut sched, &mut residual, j, i);
        }
    }
    sched
}

/// Stage 1: DWM-n over the `n` oldest packets. Stage 2: D-MWS over the
/// servers DWM-n left idle, on the queues with stage-1 packets removed.
pub fn hybrid_dwmn_mws_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let mut sched = dwmn_schedule(state, conn);
    let served: HashSet<u64> = sched.served_seq_ids().collect();
    let mut per_queue = vec![0; state.n()];
    for (_, a) in sched.iter() {
        per_queue[a.queue] += 1;
    }
    let mut residual = Residual::new(state, &served, per_queue);
    let slot = state.slot();
    let heads: Vec<Option<u64>> = (0..state.n()).map(|i| residual.head(i).map(|p| p.age(slot))).collect();
    for j in 0..state.n() {
        if !sched.is_free(j) {
            continue;
        }
        if let Some(i) = pick(conn, j, |i| heads[i]) {
            take(&mut sched, &mut residual, j, i);
        }
    }
    sched
}

/// Queue-length server-side greedy: servers in index order each take the
/// connected queue with the most packets not yet claimed this slot.
pub fn qssg_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let mut sched = Schedule::empty(state.n());
    let mut residual = Residual::full(state);
    for j in 0..state.n() {
        let choice = pick(conn, j, |i| match residual.unclaimed(i) {
            0 => None,
            r => Some(r as u64),
        });
        if let Some(i) = choice {
            take(&mut sched, &mut residual, j, i);
        }
    }
    sched
}

/// Queue-length MaxWeight: D-MWS with the slot-start queue length as weight.
pub fn qmws_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let mut sched = Schedule::empty(state.n());
    let mut residual = Residual::full(state);
    for j in 0..state.n() {
        let choice = pick(conn, j, |i| match residual.len(i) {
            0 => None,
            q => Some(q as u64),
        });
        if let Some(i) = choice {
            take(&mut sched, &mut residual, j, i);
        }
    }
    sched
}
