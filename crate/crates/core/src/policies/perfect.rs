use crate::matching::{max_cardinality_matching, BipartiteGraph};
use crate::sim::{ConnectivityMatrix, Schedule, SystemState};

/// If the queue-server connectivity graph has a perfect matching, each
/// server sends the HOL packet of its matched queue; otherwise nothing is
/// sent.
///
/// With `analysis_variant`, a HOL packet is sent only if it belongs to the
/// oldest class in the system, i.e. its key without the queue tie-break is
/// maximal. Servers of other queues idle.
pub fn perfect_matching_schedule(state: &SystemState, conn: &ConnectivityMatrix, analysis_variant: bool) -> Schedule {
    let n = state.n();
    let mut sched = Schedule::empty(n);
    let mut g = BipartiteGraph::new(n, n);
    for i in 0..n {
        for j in conn.servers_of(i) {
            g.push_edge_unchecked(i, j);
        }
    }
    let m = max_cardinality_matching(&g);
    if m.len() < n {
        return sched;
    }
    let class = |i: usize| state.queue(i).front().map(|p| state.weight(p).0 / (n as u64 + 1));
    let top = (0..n).filter_map(class).max();
    for &(i, j) in m.pairs() {
        let Some(p) = state.queue(i).front() else {
            continue;
        };
        if analysis_variant && class(i) != top {
            continue;
        }
        sched.assign(j, i, p.seq_id).expect("matching uses each server once");
    }
    sched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SystemParams;

    fn identity(n: usize) -> ConnectivityMatrix {
        let mut c = ConnectivityMatrix::disconnected(n);
        for i in 0..n {
            c.set(i, i, true);
        }
        c
    }

    #[test]
    fn identity_serves_every_hol() {
        let mut s = SystemState::new(SystemParams::new(3, 2).unwrap());
        s.apply_arrivals(&[1, 2, 1]).unwrap();
        let sched = perfect_matching_schedule(&s, &identity(3), false);
        assert_eq!(sched.packets_served(), 3);
        for j in 0..3 {
            assert_eq!(sched.get(j).unwrap().queue, j);
        }
    }

    #[test]
    fn hall_violation_serves_nothing() {
        let mut s = SystemState::new(SystemParams::new(2, 1).unwrap());
        s.apply_arrivals(&[1, 1]).unwrap();
        let c = ConnectivityMatrix::from_rows(&[vec![1, 1], vec![0, 0]]).unwrap();
        assert!(perfect_matching_schedule(&s, &c, false).is_empty());
    }

    #[test]
    fn analysis_variant_serves_only_oldest_class() {
        let mut s = SystemState::new(SystemParams::new(3, 1).unwrap());
        s.apply_arrivals(&[1, 0, 0]).unwrap();
        s.advance_slot();
        s.apply_arrivals(&[0, 1, 1]).unwrap();
        let c = identity(3);
        assert_eq!(perfect_matching_schedule(&s, &c, false).packets_served(), 3);
        let sched = perfect_matching_schedule(&s, &c, true);
        assert_eq!(sched.packets_served(), 1);
        assert_eq!(sched.get(0).unwrap().queue, 0);
    }
}
