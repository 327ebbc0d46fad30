//! Discrete-time system state for the multi-queue multi-server model.
//!
//! Queues and servers are 0-based (`queue == 0` is the first user). Within a
//! slot the order of events is: arrivals, scheduling, departures, then the
//! slot counter advances and every remaining packet ages by one.

use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Slot index.
pub type Slot = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("queue index {queue} out of range for n = {n}")]
    QueueOutOfRange { queue: usize, n: usize },
    #[error("server index {server} out of range for n = {n}")]
    ServerOutOfRange { server: usize, n: usize },
    #[error("slot order {order} outside 1..={max}")]
    SlotOrderOutOfRange { order: u32, max: u32 },
    #[error("packet arrived at slot {arrival} is in the future of slot {slot}")]
    FutureArrival { arrival: Slot, slot: Slot },
    #[error("{count} arrivals to queue {queue} exceed the per-slot bound {max}")]
    TooManyArrivals { queue: usize, count: u32, max: u32 },
    #[error("expected {expected} arrival counts, got {got}")]
    ArrivalVectorLength { expected: usize, got: usize },
    #[error("server {server} is already assigned")]
    ServerAssignedTwice { server: usize },
    #[error("packet {seq_id} is scheduled more than once")]
    PacketScheduledTwice { seq_id: u64 },
    #[error("packet {seq_id} is not present in queue {queue}")]
    PacketAbsent { queue: usize, seq_id: u64 },
    #[error("server {server} is not connected to queue {queue}")]
    Disconnected { queue: usize, server: usize },
    #[error("schedule has {got} servers, system has {expected}")]
    ScheduleSize { expected: usize, got: usize },
    #[error("invalid system parameters: {0}")]
    Params(String),
}

/// Size of the system: `n` queues and `n` servers, at most `max_arrivals`
/// (L) arrivals per queue per slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemParams {
    pub n: usize,
    pub max_arrivals: u32,
}

impl SystemParams {
    pub fn new(n: usize, max_arrivals: u32) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::Params("n must be positive".into()));
        }
        if max_arrivals == 0 {
            return Err(SimError::Params("arrival bound L must be positive".into()));
        }
        Ok(Self { n, max_arrivals })
    }

    /// Denominator of the packet weight, `(L+1)(n+1)`.
    pub fn weight_scale(&self) -> u64 {
        (self.max_arrivals as u64 + 1) * (self.n as u64 + 1)
    }
}

/// Identity of a packet, stable across coupled runs on the same traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId {
    pub arrival_slot: Slot,
    pub queue: usize,
    /// 1-based position among the same-slot arrivals to this queue.
    pub slot_order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Packet {
    pub arrival_slot: Slot,
    pub queue: usize,
    pub slot_order: u32,
    /// Bookkeeping only; never consulted by a policy.
    pub seq_id: u64,
}

impl Packet {
    pub fn id(&self) -> PacketId {
        PacketId { arrival_slot: self.arrival_slot, queue: self.queue, slot_order: self.slot_order }
    }

    pub fn age(&self, slot: Slot) -> u64 {
        slot.saturating_sub(self.arrival_slot)
    }
}

/// Packet weight scaled by `(L+1)(n+1)` so that it is an exact integer:
///
/// `key = (t - t_p)(L+1)(n+1) + (L+1-x_p)(n+1) + (n+1-q_p)`
///
/// with `q_p` the 1-based queue index. Larger key means older packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightKey(pub u64);

impl WeightKey {
    /// The weight as an exact fraction `(numerator, denominator)`.
    pub fn as_ratio(self, params: &SystemParams) -> (u64, u64) {
        (self.0, params.weight_scale())
    }

    pub fn as_f64(self, params: &SystemParams) -> f64 {
        self.0 as f64 / params.weight_scale() as f64
    }
}

impl fmt::Display for WeightKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Weight of `p` at slot `t`, checked against the parameter bounds.
pub fn packet_weight(p: &Packet, t: Slot, params: &SystemParams) -> Result<WeightKey, SimError> {
    if p.queue >= params.n {
        return Err(SimError::QueueOutOfRange { queue: p.queue, n: params.n });
    }
    if p.slot_order == 0 || p.slot_order > params.max_arrivals {
        return Err(SimError::SlotOrderOutOfRange { order: p.slot_order, max: params.max_arrivals });
    }
    if p.arrival_slot > t {
        return Err(SimError::FutureArrival { arrival: p.arrival_slot, slot: t });
    }
    Ok(weight_unchecked(p, t, params))
}

#[inline]
pub(crate) fn weight_unchecked(p: &Packet, t: Slot, params: &SystemParams) -> WeightKey {
    let l1 = params.max_arrivals as u64 + 1;
    let n1 = params.n as u64 + 1;
    let age = t - p.arrival_slot;
    WeightKey(age * l1 * n1 + (l1 - p.slot_order as u64) * n1 + (n1 - 1 - p.queue as u64))
}

/// Per-slot ON/OFF link states. Entry `(i, j)` is the link between queue `i`
/// and server `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConnectivityMatrix {
    n: usize,
    links: Vec<bool>,
}

impl ConnectivityMatrix {
    pub fn disconnected(n: usize) -> Self {
        Self { n, links: vec![false; n * n] }
    }

    pub fn full(n: usize) -> Self {
        Self { n, links: vec![true; n * n] }
    }

    /// Builds from rows of 0/1 values indexed `[queue][server]`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, SimError> {
        let n = rows.len();
        let mut m = Self::disconnected(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SimError::Params(format!("connectivity row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(i, j, true),
                    _ => return Err(SimError::Params(format!("entry ({i},{j}) = {v} is not 0/1"))),
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, queue: usize, server: usize) -> bool {
        self.links[queue * self.n + server]
    }

    #[inline]
    pub fn set(&mut self, queue: usize, server: usize, on: bool) {
        self.links[queue * self.n + server] = on;
    }

    /// Queues connected to `server`, in index order.
    pub fn queues_of(&self, server: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.get(i, server))
    }

    /// Servers connected to `queue`, in index order.
    pub fn servers_of(&self, queue: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.links[queue * self.n..(queue + 1) * self.n];
        row.iter().enumerate().filter(|(_, &on)| on).map(|(j, _)| j)
    }

    /// Row-major bit view used for trace hashing.
    pub fn as_slice(&self) -> &[bool] {
        &self.links
    }
}

/// What a single server does in a slot.
///
/// `packet == None` means the server is allocated to `queue` but has nothing
/// left to send there (several servers picked the same short queue).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub queue: usize,
    pub packet: Option<u64>,
}

/// Per-slot server allocation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    servers: Vec<Option<Assignment>>,
}

impl Schedule {
    pub fn empty(n: usize) -> Self {
        Self { servers: vec![None; n] }
    }

    pub fn n(&self) -> usize {
        self.servers.len()
    }

    /// Assigns `server` to serve packet `seq_id` of `queue`.
    pub fn assign(&mut self, server: usize, queue: usize, seq_id: u64) -> Result<(), SimError> {
        self.put(server, Assignment { queue, packet: Some(seq_id) })
    }

    /// Allocates `server` to `queue` without a packet.
    pub fn allocate_idle(&mut self, server: usize, queue: usize) -> Result<(), SimError> {
        self.put(server, Assignment { queue, packet: None })
    }

    fn put(&mut self, server: usize, a: Assignment) -> Result<(), SimError> {
        let n = self.servers.len();
        let slot = self.servers.get_mut(server).ok_or(SimError::ServerOutOfRange { server, n })?;
        if slot.is_some() {
            return Err(SimError::ServerAssignedTwice { server });
        }
        *slot = Some(a);
        Ok(())
    }

    pub fn get(&self, server: usize) -> Option<Assignment> {
        self.servers.get(server).copied().flatten()
    }

    pub fn is_free(&self, server: usize) -> bool {
        self.get(server).is_none()
    }

    /// `(server, assignment)` pairs in server order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Assignment)> + '_ {
        self.servers.iter().enumerate().filter_map(|(j, a)| a.map(|a| (j, a)))
    }

    /// Sequence ids of the packets this schedule transmits.
    pub fn served_seq_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.servers.iter().filter_map(|a| a.and_then(|a| a.packet))
    }

    pub fn packets_served(&self) -> usize {
        self.served_seq_ids().count()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.iter().all(Option::is_none)
    }

    /// Checks the schedule against the state and this slot's connectivity:
    /// each server at most once, each packet at most once, every
    /// allocation over an ON link, every packet present in its queue.
    pub fn validate(&self, state: &SystemState, conn: &ConnectivityMatrix) -> Result<(), SimError> {
        let n = state.params.n;
        if self.servers.len() != n {
            return Err(SimError::ScheduleSize { expected: n, got: self.servers.len() });
        }
        let mut seen = HashSet::new();
        for (j, a) in self.iter() {
            if a.queue >= n {
                return Err(SimError::QueueOutOfRange { queue: a.queue, n });
            }
            if !conn.get(a.queue, j) {
                return Err(SimError::Disconnected { queue: a.queue, server: j });
            }
            if let Some(seq) = a.packet {
                if !seen.insert(seq) {
                    return Err(SimError::PacketScheduledTwice { seq_id: seq });
                }
                if !state.queues[a.queue].iter().any(|p| p.seq_id == seq) {
                    return Err(SimError::PacketAbsent { queue: a.queue, seq_id: seq });
                }
            }
        }
        Ok(())
    }
}

/// Queue contents plus the current slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    params: SystemParams,
    slot: Slot,
    queues: Vec<VecDeque<Packet>>,
    next_seq: u64,
}

impl SystemState {
    pub fn new(params: SystemParams) -> Self {
        Self { params, slot: 0, queues: vec![VecDeque::new(); params.n], next_seq: 0 }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn slot(&self) -> Slot {
        self.slot
    }

    pub fn queue(&self, i: usize) -> &VecDeque<Packet> {
        &self.queues[i]
    }

    /// `Q_i(t)`.
    pub fn queue_len(&self, i: usize) -> usize {
        self.queues[i].len()
    }

    /// `Z_{i,l}(t)` for 1-based position `l`, `None` if the queue is shorter.
    pub fn packet_delay(&self, i: usize, l: usize) -> Option<u64> {
        if l == 0 {
            return None;
        }
        self.queues[i].get(l - 1).map(|p| p.age(self.slot))
    }

    /// `W_i(t)`; 0 for an empty queue.
    pub fn hol_delay(&self, i: usize) -> u64 {
        self.queues[i].front().map_or(0, |p| p.age(self.slot))
    }

    /// `W(t) = max_i W_i(t)`.
    pub fn max_hol_delay(&self) -> u64 {
        (0..self.params.n).map(|i| self.hol_delay(i)).max().unwrap_or(0)
    }

    pub fn backlog(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn weight(&self, p: &Packet) -> WeightKey {
        weight_unchecked(p, self.slot, &self.params)
    }

    /// Packets that arrived at the current slot, ordered by weight
    /// (slot order first, then queue index).
    pub fn fresh_arrivals(&self) -> Vec<Packet> {
        let mut fresh: Vec<Packet> = self
            .queues
            .iter()
            .flat_map(|q| q.iter().rev().take_while(|p| p.arrival_slot == self.slot).copied())
            .collect();
        fresh.sort_by_key(|p| std::cmp::Reverse(self.weight(p)));
        fresh
    }

    /// The `k` packets with the largest weight, heaviest first. Each queue is
    /// already weight-sorted, so this is an n-way merge over queue heads.
    pub fn oldest_k_packets(&self, k: usize) -> Vec<Packet> {
        let mut heap: BinaryHeap<(WeightKey, usize, usize)> =
            self.queues.iter().enumerate().filter_map(|(i, q)| q.front().map(|p| (self.weight(p), i, 0))).collect();
        let mut out = Vec::with_capacity(k.min(self.backlog()));
        while out.len() < k {
            let Some((_, i, pos)) = heap.pop() else { break };
            let q = &self.queues[i];
            out.push(q[pos]);
            if let Some(next) = q.get(pos + 1) {
                heap.push((self.weight(next), i, pos + 1));
            }
        }
        out
    }

    /// Appends `counts[i]` new packets to queue `i` with this slot as their
    /// arrival slot.
    pub fn apply_arrivals(&mut self, counts: &[u32]) -> Result<(), SimError> {
        if counts.len() != self.params.n {
            return Err(SimError::ArrivalVectorLength { expected: self.params.n, got: counts.len() });
        }
        if let Some((queue, &count)) = counts.iter().enumerate().find(|(_, &c)| c > self.params.max_arrivals) {
            return Err(SimError::TooManyArrivals { queue, count, max: self.params.max_arrivals });
        }
        for (i, &count) in counts.iter().enumerate() {
            for order in 1..=count {
                self.queues[i].push_back(Packet {
                    arrival_slot: self.slot,
                    queue: i,
                    slot_order: order,
                    seq_id: self.next_seq,
                });
                self.next_seq += 1;
            }
        }
        Ok(())
    }

    /// Removes every packet the schedule transmits and returns them in
    /// server order. On error the state is left untouched.
    pub fn apply_schedule(&mut self, sched: &Schedule) -> Result<Vec<Packet>, SimError> {
        let mut per_queue: HashMap<usize, Vec<u64>> = HashMap::new();
        let mut seen = HashSet::new();
        for (_, a) in sched.iter() {
            if a.queue >= self.params.n {
                return Err(SimError::QueueOutOfRange { queue: a.queue, n: self.params.n });
            }
            if let Some(seq) = a.packet {
                if !seen.insert(seq) {
                    return Err(SimError::PacketScheduledTwice { seq_id: seq });
                }
                per_queue.entry(a.queue).or_default().push(seq);
            }
        }
        for (&queue, seqs) in &per_queue {
            let q = &self.queues[queue];
            if let Some(&seq_id) = seqs.iter().find(|&&s| !q.iter().any(|p| p.seq_id == s)) {
                return Err(SimError::PacketAbsent { queue, seq_id });
            }
        }

        let mut removed: HashMap<u64, Packet> = HashMap::with_capacity(seen.len());
        for (queue, seqs) in per_queue {
            let q = &mut self.queues[queue];
            let m = seqs.len();
            let is_prefix = q.iter().take(m).all(|p| seqs.contains(&p.seq_id));
            if is_prefix {
                for p in q.drain(..m) {
                    removed.insert(p.seq_id, p);
                }
            } else {
                q.retain(|p| {
                    if seqs.contains(&p.seq_id) {
                        removed.insert(p.seq_id, *p);
                        false
                    } else {
                        true
                    }
                });
            }
        }
        Ok(sched.served_seq_ids().map(|s| removed[&s]).collect())
    }

    /// Ends the slot. Delays are derived from the slot counter, so every
    /// remaining packet ages by one.
    pub fn advance_slot(&mut self) {
        self.slot += 1;
    }

    /// Looks up a packet by sequence id in a given queue.
    pub fn find(&self, queue: usize, seq_id: u64) -> Option<&Packet> {
        self.queues.get(queue)?.iter().find(|p| p.seq_id == seq_id)
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> + '_ {
        self.queues.iter().flatten()
    }
}
