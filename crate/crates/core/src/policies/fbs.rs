//! Frame-based scheduling.
//!
//! Arriving packets are packed into frames holding at most `n - L*h` packets
//! whose arrival slots differ by at most `h`. Only the head-of-line frame is
//! ever served, and only in full.

use std::collections::VecDeque;

use super::{Policy, PolicySpec};
use crate::matching::{max_cardinality_matching, BipartiteGraph};
use crate::sim::{ConnectivityMatrix, Packet, Schedule, Slot, SystemParams, SystemState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub packets: Vec<Packet>,
    pub first_slot: Slot,
    pub last_slot: Slot,
}

impl Frame {
    fn open(p: Packet) -> Self {
        Self { packets: vec![p], first_slot: p.arrival_slot, last_slot: p.arrival_slot }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameState {
    capacity: usize,
    span: u64,
    frames: VecDeque<Frame>,
}

impl FrameState {
    /// Frames for `n - L*h` packets over `h` slots. The caller validates
    /// that the capacity is positive.
    pub fn new(params: &SystemParams, h: u32) -> Self {
        let capacity = params.n.saturating_sub(params.max_arrivals as usize * h as usize).max(1);
        Self { capacity, span: h as u64, frames: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn span(&self) -> u64 {
        self.span
    }

    pub fn frames(&self) -> &VecDeque<Frame> {
        &self.frames
    }

    pub fn hol(&self) -> Option<&Frame> {
        self.frames.front()
    }

    pub fn packet_count(&self) -> usize {
        self.frames.iter().map(|f| f.packets.len()).sum()
    }

    /// Drops the head-of-line frame after it has been served.
    pub fn pop_hol(&mut self) -> Option<Frame> {
        self.frames.pop_front()
    }
}

/// Appends `new_packets`, in the given order, to the last frame until the
/// capacity or span limit would be broken, opening new frames as needed.
pub fn fbs_update_frames(fs: &mut FrameState, new_packets: &[Packet]) {
    for &p in new_packets {
        match fs.frames.back_mut() {
            Some(f) if f.packets.len() < fs.capacity && p.arrival_slot.saturating_sub(f.first_slot) <= fs.span => {
                f.last_slot = f.last_slot.max(p.arrival_slot);
                f.packets.push(p);
            }
            _ => fs.frames.push_back(Frame::open(p)),
        }
    }
}

/// Serves the whole head-of-line frame if some matching covers all of its
/// packets, otherwise nothing.
pub fn fbs_schedule(state: &SystemState, fs: &FrameState, conn: &ConnectivityMatrix) -> Schedule {
    let n = state.n();
    let mut sched = Schedule::empty(n);
    let Some(frame) = fs.hol() else {
        return sched;
    };
    let mut g = BipartiteGraph::new(frame.packets.len(), n);
    for (k, p) in frame.packets.iter().enumerate() {
        for j in conn.servers_of(p.queue) {
            g.push_edge_unchecked(k, j);
        }
    }
    let m = max_cardinality_matching(&g);
    if m.len() == frame.packets.len() {
        for &(k, j) in m.pairs() {
            let p = &frame.packets[k];
            sched.assign(j, p.queue, p.seq_id).expect("matching uses each server once");
        }
    }
    sched
}

/// FBS as a [`Policy`]. Frames are fed from the packets that arrived in the
/// current slot: heaviest first in the analysis variant, otherwise queue by
/// queue.
#[derive(Debug, Clone)]
pub struct FbsPolicy {
    h: u32,
    analysis_variant: bool,
    frames: FrameState,
    filled_through: Option<Slot>,
}

impl FbsPolicy {
    pub fn new(params: &SystemParams, h: u32, analysis_variant: bool) -> Self {
        Self { h, analysis_variant, frames: FrameState::new(params, h), filled_through: None }
    }

    pub fn frames(&self) -> &FrameState {
        &self.frames
    }
}

impl Policy for FbsPolicy {
    fn spec(&self) -> PolicySpec {
        PolicySpec::fbs(self.h, self.analysis_variant)
    }

    fn schedule(&mut self, state: &SystemState, conn: &ConnectivityMatrix) -> Schedule {
        if self.filled_through.is_none_or(|t| t < state.slot()) {
            let mut fresh = state.fresh_arrivals();
            if !self.analysis_variant {
                fresh.sort_by_key(|p| (p.queue, p.slot_order));
            }
            fbs_update_frames(&mut self.frames, &fresh);
            self.filled_through = Some(state.slot());
        }
        let sched = fbs_schedule(state, &self.frames, conn);
        if !sched.is_empty() {
            self.frames.pop_hol();
        }
        sched
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packets(slot: Slot, queue: usize, count: usize) -> Vec<Packet> {
        (0..count)
            .map(|k| Packet { arrival_slot: slot, queue, slot_order: k as u32 + 1, seq_id: slot * 1000 + k as u64 })
            .collect()
    }

    #[test]
    fn capacity_rule() {
        let params = SystemParams::new(10, 1).unwrap();
        let mut fs = FrameState::new(&params, 2);
        assert_eq!(fs.capacity(), 8);
        let ps: Vec<Packet> = (0..9).flat_map(|i| packets(0, i, 1)).collect();
        fbs_update_frames(&mut fs, &ps);
        assert_eq!(fs.frames().len(), 2);
        assert_eq!(fs.frames()[0].packets.len(), 8);
        assert_eq!(fs.frames()[1].packets, vec![ps[8]]);
    }

    #[test]
    fn single_packet_single_frame() {
        let mut fs = FrameState::new(&SystemParams::new(4, 1).unwrap(), 1);
        fbs_update_frames(&mut fs, &packets(3, 0, 1));
        assert_eq!(fs.frames().len(), 1);
        assert_eq!(fs.hol().unwrap().first_slot, 3);
    }

    #[test]
    fn span_rule() {
        let mut fs = FrameState::new(&SystemParams::new(10, 1).unwrap(), 2);
        fbs_update_frames(&mut fs, &packets(0, 0, 1));
        fbs_update_frames(&mut fs, &packets(2, 1, 1));
        assert_eq!(fs.frames().len(), 1);
        fbs_update_frames(&mut fs, &packets(3, 2, 1));
        assert_eq!(fs.frames().len(), 2);
    }

    #[test]
    fn all_or_nothing() {
        let params = SystemParams::new(3, 1).unwrap();
        let mut s = SystemState::new(params);
        s.apply_arrivals(&[1, 0, 0]).unwrap();
        let mut policy = FbsPolicy::new(&params, 1, true);
        let served = policy.schedule(&s, &ConnectivityMatrix::full(3));
        assert_eq!(served.packets_served(), 1);
        assert!(policy.frames().frames().is_empty());

        let mut s = SystemState::new(params);
        s.apply_arrivals(&[1, 1, 0]).unwrap();
        let mut policy = FbsPolicy::new(&params, 1, true);
        // Queue 1 reaches no server, so the two-packet frame cannot go out.
        let conn = ConnectivityMatrix::from_rows(&[vec![1, 1, 1], vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        assert!(policy.schedule(&s, &conn).is_empty());
        assert_eq!(policy.frames().packet_count(), 2);
    }

    #[test]
    fn repeated_call_in_same_slot_does_not_refill() {
        let params = SystemParams::new(3, 1).unwrap();
        let mut s = SystemState::new(params);
        s.apply_arrivals(&[1, 1, 0]).unwrap();
        let mut policy = FbsPolicy::new(&params, 1, false);
        let conn = ConnectivityMatrix::disconnected(3);
        policy.schedule(&s, &conn);
        policy.schedule(&s, &conn);
        assert_eq!(policy.frames().packet_count(), 2);
    }
}
