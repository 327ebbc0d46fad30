//! Scheduling in multi-channel multi-user systems with ON/OFF links.
//!
//! * [`sim`]: queues, packets, packet weights, connectivity and schedules.
//! * [`matching`]: bipartite matching kernels.
//! * [`policies`]: DWM, DWM-n, D-MWS, the DWM-n/D-MWS hybrid, FBS,
//!   perfect-matching, Q-SSG, Q-MWS and the OPF/MWF condition checks.
//! * [`traffic`]: seeded arrival and channel generators.
//! * [`analysis`]: delay statistics, rate-function fits and bounds.

pub mod analysis;
pub mod matching;
pub mod policies;
pub mod sim;
pub mod traffic;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use sim::{
    packet_weight, Assignment, ConnectivityMatrix, Packet, PacketId, Schedule, SimError, Slot, SystemParams,
    SystemState, WeightKey,
};
