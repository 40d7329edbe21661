//! Deterministic single-cell uplink simulation.
//!
//! Vehicles drive a closed rectangular route around the gNB and emit one
//! LiDAR frame per frame interval, sized by their current
//! [`ApplicationMode`]. Frames are cut into fixed-size packets and queued;
//! the scheduler shares the cell's OFDM symbols among backlogged vehicles.
//! Every control period the per-vehicle KPIs are folded into a normalised
//! [`StateVector`] and a [`QosSample`](crate::reward::QosSample).
//!
//! PRR counts the packets generated in the period that were delivered before
//! it ended. Delay statistics cover every packet delivered in the period,
//! including backlog from earlier periods.

mod config;
mod env;
mod mcs;
mod mode;

pub use config::SimConfig;
pub use env::{reset, NetworkEnv, StateVector, StepKpis, StepOutcome, STATE_DIM};
pub use mcs::{sinr_to_mcs, McsEntry, McsTable};
pub use mode::{action_index, ApplicationMode, DQL_ACTIONS};
