//! Predictive-QoS simulation for teleoperated driving.
//!
//! Vehicles stream compressed LiDAR frames through a single shared cell. A
//! Double Deep Q-Learning agent hosted at the base station picks each
//! vehicle's application mode (compression level) every control period,
//! trading packet delay and reception ratio against point-cloud fidelity.
//!
//! Module map:
//! - [`qoe_metrics`]: point clouds and the symmetric Chamfer distance.
//! - [`reward`]: QoS predicate and the piece-wise QoS/QoE reward.
//! - [`network_env`]: mobility, channel, link adaptation, scheduling, KPIs.
//! - [`dqn_agent`]: Q-network, AdamW, replay buffer, Double-DQN training.
//! - [`policies`]: the [`policies::Policy`] trait and its name registry.
//! - [`harness`]: offline/online training, test runs, CSV export.

pub mod config;
pub mod dqn_agent;
pub mod error;
pub mod harness;
pub mod network_env;
pub mod policies;
pub mod qoe_metrics;
pub mod reward;
pub mod seeds;

pub use error::{Error, Result};
