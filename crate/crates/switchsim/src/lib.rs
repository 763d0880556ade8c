//! Discrete-time simulator for an n x n input-queued crossbar switch.
//!
//! The crate provides the exact slot dynamics, a family of schedulers
//! from maximum-weight matching down to constant-time flip heuristics,
//! admissible traffic construction, heavy-traffic metrics with the cone
//! geometry behind state-space collapse, and independent oracles that
//! cross-check each piece.

pub mod config;
pub mod driver;
pub mod geometry;
pub mod mat;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod sched;
pub mod sim;
pub mod switch;
pub mod traffic;
pub mod verify;

/// Concrete scalar used on the simulator's real-valued paths.
pub type Real = f64;

/// The orthogonal split produced by the projections, on the simulator
/// scalar. The generic form lives in [`geometry::Decomposition`].
pub type Decomposition = geometry::Decomposition<Real>;

pub use config::Config;
pub use sched::Policy;
pub use sim::{run_replications, run_trajectory, RunRecord, SimSettings};
pub use switch::{step, weight, QueueMatrix, Schedule, SlotOutcome};
pub use traffic::TrafficSpec;
