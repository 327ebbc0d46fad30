//! Seeded arrival and channel generators.
//!
//! Every random entity (a user's arrival chain, a link's channel chain) owns
//! a ChaCha8 stream whose key depends only on `(seed, replication)` and
//! whose stream number depends only on the entity. Traces are therefore
//! identical no matter which policy consumes them.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::sim::ConnectivityMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("probability {name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("row {row} of {name} sums to {sum}, not 1")]
    RowSum { name: &'static str, row: usize, sum: f64 },
    #[error("{name} must be at least 1")]
    ZeroBatch { name: &'static str },
    #[error("the counterexample arrival model needs n = 2, got n = {0}")]
    CounterexampleSize(usize),
}

/// 2x2 row-stochastic matrix. State 0 is the chain's "state 1" (burst for
/// arrivals, ON for channels).
pub type Transition = [[f64; 2]; 2];

fn check_prob(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::Probability { name, value })
    }
}

fn check_transition(name: &'static str, p: &Transition) -> Result<(), ModelError> {
    for (row, r) in p.iter().enumerate() {
        for &v in r {
            check_prob(name, v)?;
        }
        let sum = r[0] + r[1];
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::RowSum { name, row, sum });
        }
    }
    Ok(())
}

/// Stationary probability of state 0.
pub fn stationary_first(p: &Transition) -> f64 {
    let (leave, enter) = (p[0][1], p[1][0]);
    if leave + enter == 0.0 {
        1.0
    } else {
        enter / (leave + enter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    /// One packet per queue with probability `p`.
    Bernoulli { p: f64 },
    /// Per-user two-state chain: `batch` packets in state 0, none in state 1.
    /// Transitions happen at the end of each slot.
    MarkovBurst { batch: u32, p: Transition },
    /// Two-slot frames on two queues: with probability `p`, `k` packets go
    /// to queue 0 in the even slot and `k` to queue 1 in the odd slot.
    Counterexample { k: u32, p: f64 },
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ArrivalModel::Bernoulli { p } => check_prob("p", *p),
            ArrivalModel::MarkovBurst { batch, p } => {
                if *batch == 0 {
                    return Err(ModelError::ZeroBatch { name: "batch" });
                }
                check_transition("arrival transition matrix", p)
            }
            ArrivalModel::Counterexample { k, p } => {
                if *k == 0 {
                    return Err(ModelError::ZeroBatch { name: "K" });
                }
                check_prob("p", *p)
            }
        }
    }

    /// Per-queue per-slot arrival bound `L`.
    pub fn max_arrivals(&self) -> u32 {
        match self {
            ArrivalModel::Bernoulli { .. } => 1,
            ArrivalModel::MarkovBurst { batch, .. } => *batch,
            ArrivalModel::Counterexample { k, .. } => *k,
        }
    }

    /// Long-run arrivals per queue per slot.
    pub fn mean_rate(&self) -> f64 {
        match self {
            ArrivalModel::Bernoulli { p } => *p,
            ArrivalModel::MarkovBurst { batch, p } => *batch as f64 * stationary_first(p),
            ArrivalModel::Counterexample { k, p } => *k as f64 * p / 2.0,
        }
    }
}

impl fmt::Display for ArrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArrivalModel::Bernoulli { p } => write!(f, "bernoulli(p={p})"),
            ArrivalModel::MarkovBurst { batch, p } => {
                write!(f, "markov_burst(batch={batch}, p11={}, p21={})", p[0][0], p[1][0])
            }
            ArrivalModel::Counterexample { k, p } => write!(f, "counterexample(k={k}, p={p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    /// Every link ON with probability `q`, independently per slot.
    Iid { q: f64 },
    /// Per-link two-state chain, ON in state 0. Near users (even 0-based
    /// index) follow `near`, far users follow `far`.
    GilbertElliott { near: Transition, far: Transition },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ChannelModel::Iid { q } => check_prob("q", *q),
            ChannelModel::GilbertElliott { near, far } => {
                check_transition("near transition matrix", near)?;
                check_transition("far transition matrix", far)
            }
        }
    }

    /// Long-run ON probability of the links of queue `i`.
    pub fn on_probability(&self, i: usize) -> f64 {
        match self {
            ChannelModel::Iid { q } => *q,
            ChannelModel::GilbertElliott { near, far } => stationary_first(if is_near(i) { near } else { far }),
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelModel::Iid { q } => write!(f, "iid(q={q})"),
            ChannelModel::GilbertElliott { near, far } => write!(
                f,
                "gilbert_elliott(near_p11={}, near_p21={}, far_p11={}, far_p21={})",
                near[0][0], near[1][0], far[0][0], far[1][0]
            ),
        }
    }
}

/// Near users are the odd ones when counted from 1.
pub fn is_near(queue: usize) -> bool {
    queue.is_multiple_of(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Arrival = 1,
    Channel = 2,
}

/// Identifies the trace family shared by every policy in a coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replication: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self { seed, replication }
    }

    /// ChaCha8 stream for one entity. `index` is the queue for arrivals and
    /// `queue * n + server` for links.
    pub fn rng(&self, kind: StreamKind, index: u64) -> ChaCha8Rng {
        let mut sm = self.seed ^ self.replication.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut sm).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((kind as u64) << 56) | index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on `[0, 1)` with 53 bits.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    unit(rng) < p
}

/// Two-state chain: state 0 w.p. `p[s][0]` from state `s`.
fn step(rng: &mut ChaCha8Rng, p: &Transition, s: u8) -> u8 {
    if bernoulli(rng, p[s as usize][0]) {
        0
    } else {
        1
    }
}

fn stationary_draw(rng: &mut ChaCha8Rng, p: &Transition) -> u8 {
    if bernoulli(rng, stationary_first(p)) {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone)]
pub struct ArrivalGenerator {
    model: ArrivalModel,
    rngs: Vec<ChaCha8Rng>,
    states: Vec<u8>,
    slot: u64,
    pending_second: bool,
}

impl ArrivalGenerator {
    pub fn new(model: ArrivalModel, n: usize, key: StreamKey) -> Result<Self, ModelError> {
        model.validate()?;
        let streams = match model {
            ArrivalModel::Counterexample { .. } => {
                if n != 2 {
                    return Err(ModelError::CounterexampleSize(n));
                }
                1
            }
            _ => n,
        };
        let mut rngs: Vec<ChaCha8Rng> = (0..streams as u64).map(|i| key.rng(StreamKind::Arrival, i)).collect();
        let states = match &model {
            ArrivalModel::MarkovBurst { p, .. } => rngs.iter_mut().map(|r| stationary_draw(r, p)).collect(),
            _ => Vec::new(),
        };
        Ok(Self { model, rngs, states, slot: 0, pending_second: false })
    }

    pub fn model(&self) -> &ArrivalModel {
        &self.model
    }

    /// Fills `out` (one entry per queue) with this slot's arrivals.
    pub fn next_slot(&mut self, out: &mut [u32]) {
        match self.model {
            ArrivalModel::Bernoulli { p } => {
                for (c, rng) in out.iter_mut().zip(&mut self.rngs) {
                    *c = bernoulli(rng, p) as u32;
                }
            }
            ArrivalModel::MarkovBurst { batch, p } => {
                for ((c, rng), s) in out.iter_mut().zip(&mut self.rngs).zip(&mut self.states) {
                    *c = if *s == 0 { batch } else { 0 };
                    *s = step(rng, &p, *s);
                }
            }
            ArrivalModel::Counterexample { k, p } => {
                out.fill(0);
                if self.slot.is_multiple_of(2) {
                    self.pending_second = bernoulli(&mut self.rngs[0], p);
                    if self.pending_second {
                        out[0] = k;
                    }
                } else if self.pending_second {
                    out[1] = k;
                }
            }
        }
        self.slot += 1;
    }
}

#[derive(Debug, Clone)]
pub struct ChannelGenerator {
    model: ChannelModel,
    n: usize,
    rngs: Vec<ChaCha8Rng>,
    states: Vec<u8>,
}

impl ChannelGenerator {
    pub fn new(model: ChannelModel, n: usize, key: StreamKey) -> Result<Self, ModelError> {
        model.validate()?;
        let mut rngs: Vec<ChaCha8Rng> = (0..(n * n) as u64).map(|l| key.rng(StreamKind::Channel, l)).collect();
        let states = match &model {
            ChannelModel::Iid { .. } => Vec::new(),
            ChannelModel::GilbertElliott { near, far } => rngs
                .iter_mut()
                .enumerate()
                .map(|(l, r)| stationary_draw(r, if is_near(l / n) { near } else { far }))
                .collect(),
        };
        Ok(Self { model, n, rngs, states })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Overwrites `conn` with this slot's link states.
    pub fn next_slot(&mut self, conn: &mut ConnectivityMatrix) {
        let n = self.n;
        match self.model {
            ChannelModel::Iid { q } => {
                for (l, rng) in self.rngs.iter_mut().enumerate() {
                    conn.set(l / n, l % n, bernoulli(rng, q));
                }
            }
            ChannelModel::GilbertElliott { near, far } => {
                for (l, (rng, s)) in self.rngs.iter_mut().zip(&mut self.states).enumerate() {
                    let i = l / n;
                    conn.set(i, l % n, *s == 0);
                    *s = step(rng, if is_near(i) { &near } else { &far }, *s);
                }
            }
        }
    }
}
