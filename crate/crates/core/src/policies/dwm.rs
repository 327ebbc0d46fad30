use crate::matching::{max_edge_weight_matching, max_vertex_weight_matching, BipartiteGraph};
use crate::sim::{ConnectivityMatrix, Packet, Schedule, SystemState};

/// Delay-weighted matching with packet weights as edge weights.
///
/// Left side: the `n` oldest packets of every queue (up to `n^2` vertices).
/// Right side: servers. Edge `(p, j)` exists iff `p`'s queue is connected to
/// server `j`; its weight is the packet weight. Since every edge out of a
/// packet carries that packet's weight, the maximum edge-weight matching is
/// a maximum vertex-weight matching over these packets.
pub fn dwm_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let n = state.n();
    let candidates: Vec<Packet> = (0..n).flat_map(|i| state.queue(i).iter().take(n).copied()).collect();
    let mut g = BipartiteGraph::new(candidates.len(), n);
    for (k, p) in candidates.iter().enumerate() {
        let w = state.weight(p).0;
        for j in conn.servers_of(p.queue) {
            g.push_weighted_edge_unchecked(k, j, w);
        }
    }
    let matching = max_edge_weight_matching(&g).expect("graph carries edge weights");
    to_schedule(n, &candidates, matching.pairs())
}

/// DWM restricted to the `n` oldest packets in the whole system, solved as a
/// maximum vertex-weight matching. Servers not matched stay idle.
pub fn dwmn_schedule(state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
    let n = state.n();
    let oldest = state.oldest_k_packets(n);
    let (g, _) = oldest_packet_graph(state, conn, &oldest);
    let matching = max_vertex_weight_matching(&g).expect("weights set");
    to_schedule(n, &oldest, matching.pairs())
}

/// Packets (left) vs servers (right) with packet weights on the left.
pub(crate) fn oldest_packet_graph(
    state: &SystemState,
    conn: &ConnectivityMatrix,
    packets: &[Packet],
) -> (BipartiteGraph, Vec<u64>) {
    let mut g = BipartiteGraph::new(packets.len(), state.n());
    for (k, p) in packets.iter().enumerate() {
        for j in conn.servers_of(p.queue) {
            g.push_edge_unchecked(k, j);
        }
    }
    let weights: Vec<u64> = packets.iter().map(|p| state.weight(p).0).collect();
    g.set_left_weights(weights.clone()).expect("one weight per packet");
    (g, weights)
}

fn to_schedule(n: usize, packets: &[Packet], pairs: &[(usize, usize)]) -> Schedule {
    let mut sched = Schedule::empty(n);
    for &(k, j) in pairs {
        let p = &packets[k];
        sched.assign(j, p.queue, p.seq_id).expect("matching uses each server once");
    }
    sched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SystemParams;

    #[test]
    fn empty_system_empty_schedule() {
        let s = SystemState::new(SystemParams::new(3, 1).unwrap());
        let c = ConnectivityMatrix::full(3);
        assert!(dwm_schedule(&s, &c).is_empty());
        assert!(dwmn_schedule(&s, &c).is_empty());
    }

    #[test]
    fn single_packet_served() {
        let mut s = SystemState::new(SystemParams::new(2, 1).unwrap());
        s.apply_arrivals(&[0, 1]).unwrap();
        let c = ConnectivityMatrix::from_rows(&[vec![0, 0], vec![0, 1]]).unwrap();
        for sched in [dwm_schedule(&s, &c), dwmn_schedule(&s, &c)] {
            assert_eq!(sched.packets_served(), 1);
            assert_eq!(sched.get(1).unwrap().queue, 1);
        }
    }

    #[test]
    fn dwmn_full_connectivity_serves_everything_up_to_n() {
        let mut s = SystemState::new(SystemParams::new(4, 2).unwrap());
        s.apply_arrivals(&[2, 1, 0, 0]).unwrap();
        let c = ConnectivityMatrix::full(4);
        assert_eq!(dwmn_schedule(&s, &c).packets_served(), 3);
    }

    #[test]
    fn dwm_serves_several_packets_of_one_queue() {
        let mut s = SystemState::new(SystemParams::new(3, 3).unwrap());
        s.apply_arrivals(&[3, 0, 0]).unwrap();
        let c = ConnectivityMatrix::full(3);
        let sched = dwm_schedule(&s, &c);
        assert_eq!(sched.packets_served(), 3);
        sched.validate(&s, &c).unwrap();
    }
}
