//! Double Deep Q-Learning, implemented from scratch.
//!
//! [`QNetwork`] is a small ReLU multilayer perceptron with hand-written
//! backpropagation. [`DqnAgent`] owns an online and a target network, an
//! [`AdamW`] optimiser and a [`ReplayBuffer`]; each [`DqnAgent::train_batch`]
//! regresses the online Q-value of the taken action onto the Double-DQN
//! target, where the next action is chosen by the online network and scored
//! by the target network.

mod adam;
mod agent;
mod checkpoint;
mod network;
mod replay;

pub use adam::AdamW;
pub use agent::{
    double_q_target, greedy_action, select_action, AgentConfig, DqnAgent, EpsilonSchedule,
    Transition,
};
pub use checkpoint::Checkpoint;
pub use network::{QNetwork, Sample, DEFAULT_LAYER_SIZES};
pub use replay::ReplayBuffer;
