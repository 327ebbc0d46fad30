//! Slot-level checks of the two sufficient conditions: serving the oldest
//! packets first (OPF) and max-weight-first server allocation (MWF).

use std::collections::HashSet;

use super::dwm::oldest_packet_graph;
use crate::matching::max_cardinality_matching;
use crate::sim::{ConnectivityMatrix, Packet, Schedule, SystemState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpfReport {
    /// Largest `k` such that the `k` oldest packets can be served together.
    pub k_star: usize,
    /// Oldest packets among the top `k_star` that the schedule left behind.
    pub missed: Vec<Packet>,
}

impl OpfReport {
    pub fn passed(&self) -> bool {
        self.missed.is_empty()
    }
}

pub fn opf_report(state: &SystemState, conn: &ConnectivityMatrix, sched: &Schedule) -> OpfReport {
    // At most n packets go out per slot, so k* <= n.
    let oldest = state.oldest_k_packets(state.n());
    let saturable = |k: usize| {
        let (g, _) = oldest_packet_graph(state, conn, &oldest[..k]);
        max_cardinality_matching(&g).len() == k
    };
    // Saturability of prefixes is monotone: search the last saturable one.
    let (mut lo, mut hi) = (0, oldest.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if saturable(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let served: HashSet<u64> = sched.served_seq_ids().collect();
    let missed = oldest[..lo].iter().filter(|p| !served.contains(&p.seq_id)).copied().collect();
    OpfReport { k_star: lo, missed }
}

/// True iff `sched` serves the `k*` oldest packets (it may serve others too).
pub fn opf_condition_check(state: &SystemState, conn: &ConnectivityMatrix, sched: &Schedule) -> bool {
    opf_report(state, conn, sched).passed()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwfViolation {
    /// Server allocated to `queue` whose HOL delay is below the `M`-th
    /// packet delay of `rival`, a max-delay queue of the server holding at
    /// least `M` packets.
    Outranked { server: usize, queue: usize, rival: usize },
    /// Server left unallocated although `rival` qualifies.
    Unallocated { server: usize, rival: usize },
}

/// All MWF violations of `sched` with threshold `m`.
///
/// For server `j`, let `Γ_j` be its connected queues with the largest HOL
/// delay `W` (zero when empty) and `Z_{r,m}` the delay of the `m`-th packet
/// of queue `r`. A server allocated to queue `i` (with or without a packet)
/// needs `W_i >= Z_{r,m}` for every `r` in `Γ_j` with `Q_r >= m`. An
/// unallocated server is a violation only if some such `r` exists.
pub fn mwf_violations(state: &SystemState, conn: &ConnectivityMatrix, sched: &Schedule, m: usize) -> Vec<MwfViolation> {
    let n = state.n();
    let w: Vec<u64> = (0..n).map(|i| state.hol_delay(i)).collect();
    let mut out = Vec::new();
    for j in 0..n {
        let Some(max_w) = conn.queues_of(j).map(|i| w[i]).max() else {
            continue;
        };
        let rivals: Vec<(usize, u64)> = conn
            .queues_of(j)
            .filter(|&r| w[r] == max_w)
            .filter_map(|r| state.packet_delay(r, m).map(|z| (r, z)))
            .collect();
        match sched.get(j) {
            Some(a) => {
                if let Some(&(rival, _)) = rivals.iter().find(|&&(_, z)| w[a.queue] < z) {
                    out.push(MwfViolation::Outranked { server: j, queue: a.queue, rival });
                }
            }
            None => {
                if let Some(&(rival, _)) = rivals.first() {
                    out.push(MwfViolation::Unallocated { server: j, rival });
                }
            }
        }
    }
    out
}

pub fn mwf_condition_check(state: &SystemState, conn: &ConnectivityMatrix, sched: &Schedule, m: usize) -> bool {
    mwf_violations(state, conn, sched, m).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{dmws_schedule, dwmn_schedule};
    use crate::sim::SystemParams;

    #[test]
    fn empty_system_passes() {
        let s = SystemState::new(SystemParams::new(3, 1).unwrap());
        let c = ConnectivityMatrix::full(3);
        let r = opf_report(&s, &c, &Schedule::empty(3));
        assert_eq!(r.k_star, 0);
        assert!(r.passed());
        assert!(mwf_condition_check(&s, &c, &Schedule::empty(3), 3));
    }

    #[test]
    fn dmws_can_miss_the_oldest_packets() {
        // Queues 0 and 1 have equal HOL delay; queue 0's packet wins the
        // weight tie-break. Server 0 reaches both and picks queue 0, leaving
        // server 1 (which reaches only queue 0) with nothing new to do.
        let mut s = SystemState::new(SystemParams::new(2, 1).unwrap());
        s.apply_arrivals(&[1, 1]).unwrap();
        let c = ConnectivityMatrix::from_rows(&[vec![1, 1], vec![1, 0]]).unwrap();
        let sched = dmws_schedule(&s, &c);
        let r = opf_report(&s, &c, &sched);
        assert_eq!(r.k_star, 2);
        assert!(!r.passed());
        assert!(opf_condition_check(&s, &c, &dwmn_schedule(&s, &c)));
    }

    #[test]
    fn dwmn_can_idle_a_server_with_a_long_queue() {
        // n = 2: both oldest packets sit in queue 0, which only server 0
        // reaches. Server 1 reaches queue 1 holding 2 younger packets.
        let mut s = SystemState::new(SystemParams::new(2, 2).unwrap());
        s.apply_arrivals(&[2, 0]).unwrap();
        s.advance_slot();
        s.apply_arrivals(&[0, 2]).unwrap();
        let c = ConnectivityMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sched = dwmn_schedule(&s, &c);
        assert!(sched.is_free(1));
        assert_eq!(mwf_violations(&s, &c, &sched, 2), vec![MwfViolation::Unallocated { server: 1, rival: 1 }]);
        assert!(mwf_condition_check(&s, &c, &dmws_schedule(&s, &c), 2));
    }

    #[test]
    fn outranked_allocation_is_flagged() {
        let mut s = SystemState::new(SystemParams::new(2, 2).unwrap());
        s.apply_arrivals(&[2, 0]).unwrap();
        s.advance_slot();
        s.apply_arrivals(&[0, 1]).unwrap();
        let c = ConnectivityMatrix::full(2);
        let mut sched = Schedule::empty(2);
        sched.assign(0, 1, s.queue(1)[0].seq_id).unwrap();
        sched.assign(1, 0, s.queue(0)[0].seq_id).unwrap();
        assert_eq!(mwf_violations(&s, &c, &sched, 2), vec![MwfViolation::Outranked { server: 0, queue: 1, rival: 0 }]);
    }
}
