use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamW;
use super::checkpoint::Checkpoint;
use super::network::{QNetwork, Sample, DEFAULT_LAYER_SIZES};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Discount factor λ in `[0, 1)`.
    pub discount: f64,
    pub learning_rate: f64,
    /// Decoupled weight decay coefficient.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Gradient steps between full copies of the online network into the
    /// target network.
    pub target_sync_period: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Episodes over which ε decays linearly; `None` means the whole online
    /// phase.
    pub eps_decay_episodes: Option<usize>,
    pub rng_seed: u64,
    pub layer_sizes: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            learning_rate: 1e-4,
            weight_decay: 1e-3,
            batch_size: 10,
            replay_capacity: 50_000,
            target_sync_period: 100,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_episodes: None,
            rng_seed: 0,
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "agent.discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("agent.learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("agent.weight_decay must be non-negative".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::Config(
                "agent.batch_size must be positive and fit in agent.replay_capacity".into(),
            ));
        }
        if self.target_sync_period == 0 {
            return Err(Error::Config("agent.target_sync_period must be positive".into()));
        }
        for (name, eps) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Config(format!("agent.{name} must lie in [0, 1], got {eps}")));
            }
        }
        if self.eps_decay_episodes == Some(0) {
            return Err(Error::Config("agent.eps_decay_episodes must be positive".into()));
        }
        QNetwork::zeros(&self.layer_sizes).map(|_| ())
    }

    pub fn epsilon_schedule(&self, online_episodes: usize) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.eps_start,
            end: self.eps_end,
            decay_episodes: self.eps_decay_episodes.unwrap_or(online_episodes).max(1),
        }
    }
}

/// Linear decay from `start` at episode 0 to `end` at episode
/// `decay_episodes - 1`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_episodes: 1,
        }
    }

    pub fn at(&self, episode: usize) -> f64 {
        if self.decay_episodes <= 1 {
            return self.end;
        }
        let frac = (episode as f64 / (self.decay_episodes - 1) as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    /// Raw reward in `[0, 1]`.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Index of the largest Q-value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Always consumes one uniform draw, plus one more when
/// exploring.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    let q = net.forward(state)?;
    if rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..net.output_dim()))
    } else {
        Ok(greedy_action(&q))
    }
}

/// `r` for terminal transitions, else
/// `r + λ · Q_target(s', argmax_a Q_online(s', a))`.
pub fn double_q_target(
    online: &QNetwork,
    target: &QNetwork,
    t: &Transition,
    discount: f64,
) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let next_action = greedy_action(&online.forward(&t.next_state)?);
    Ok(t.reward + discount * target.forward(&t.next_state)?[next_action])
}

/// Online/target network pair with optimiser, replay and exploration RNG.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: AgentConfig,
    online: QNetwork,
    target: QNetwork,
    optimizer: AdamW,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    train_steps: u64,
    frozen: bool,
}

impl DqnAgent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let online = QNetwork::glorot(&config.layer_sizes, &mut rng)?;
        Self::assemble(config, online.clone(), online, None, 0, rng)
    }

    /// Rebuilds an agent from saved weights and optimiser state. The replay
    /// buffer starts empty; the exploration RNG is seeded from `config`.
    pub fn from_checkpoint(config: AgentConfig, ckpt: &Checkpoint) -> Result<Self> {
        config.validate()?;
        if ckpt.layer_sizes != config.layer_sizes {
            return Err(Error::Checkpoint(format!(
                "checkpoint layers {:?} do not match configured {:?}",
                ckpt.layer_sizes, config.layer_sizes
            )));
        }
        let online = QNetwork::from_parameters(&ckpt.layer_sizes, ckpt.online.clone())?;
        let target = QNetwork::from_parameters(&ckpt.layer_sizes, ckpt.target.clone())?;
        if ckpt.adam_m.len() != online.parameters().len() {
            return Err(Error::Checkpoint("optimiser state size mismatch".into()));
        }
        let optimizer = AdamW::from_state(
            config.learning_rate,
            config.weight_decay,
            ckpt.adam_step,
            ckpt.adam_m.clone(),
            ckpt.adam_v.clone(),
        )?;
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Self::assemble(config, online, target, Some(optimizer), ckpt.train_steps, rng)
    }

    fn assemble(
        config: AgentConfig,
        online: QNetwork,
        target: QNetwork,
        optimizer: Option<AdamW>,
        train_steps: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let optimizer = optimizer.unwrap_or_else(|| {
            AdamW::new(online.parameters().len(), config.learning_rate, config.weight_decay)
        });
        Ok(Self {
            replay: ReplayBuffer::new(config.replay_capacity),
            online,
            target,
            optimizer,
            rng,
            train_steps,
            frozen: false,
            config,
        })
    }

    pub fn to_checkpoint(&self, action_ids: &[u16]) -> Checkpoint {
        Checkpoint {
            action_ids: action_ids.to_vec(),
            layer_sizes: self.online.sizes().to_vec(),
            train_steps: self.train_steps,
            online: self.online.parameters().to_vec(),
            target: self.target.parameters().to_vec(),
            adam_step: self.optimizer.step_count(),
            adam_m: self.optimizer.first_moment().to_vec(),
            adam_v: self.optimizer.second_moment().to_vec(),
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut QNetwork {
        &mut self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn optimizer(&self) -> &AdamW {
        &self.optimizer
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// After freezing, every training call fails with an invariant error.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// ε-greedy action from the online network using the agent's own RNG.
    pub fn act(&mut self, state: &[f64], epsilon: f64) -> Result<usize> {
        select_action(&self.online, state, epsilon, &mut self.rng)
    }

    pub fn observe(&mut self, t: Transition) -> Result<()> {
        if t.action >= self.online.output_dim() {
            return Err(Error::Domain(format!("action {} out of range", t.action)));
        }
        if !(0.0..=1.0).contains(&t.reward) {
            return Err(Error::Domain(format!("reward {} outside [0, 1]", t.reward)));
        }
        let dim = self.online.input_dim();
        if t.state.len() != dim || t.next_state.len() != dim {
            return Err(Error::Domain(format!("transition states must have {dim} entries")));
        }
        self.replay.push(t);
        Ok(())
    }

    /// Samples a batch and trains on it; `Ok(None)` while the replay buffer
    /// holds fewer than `batch_size` transitions.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        self.ensure_trainable()?;
        match self.replay.sample(self.config.batch_size, &mut self.rng) {
            Some(batch) => self.train_batch(&batch).map(Some),
            None => Ok(None),
        }
    }

    fn ensure_trainable(&self) -> Result<()> {
        if self.frozen {
            return Err(Error::Invariant(
                "learning update requested on a frozen agent".into(),
            ));
        }
        Ok(())
    }

    /// One AdamW step on the mean squared Double-DQN error of `batch`.
    /// Returns the pre-update loss.
    pub fn train_batch(&mut self, batch: &[Transition]) -> Result<f64> {
        self.ensure_trainable()?;
        if batch.is_empty() {
            return Err(Error::Domain("empty training batch".into()));
        }
        if batch.len() != self.config.batch_size {
            return Err(Error::Precondition(format!(
                "batch has {} transitions, configured batch size is {}",
                batch.len(),
                self.config.batch_size
            )));
        }
        let targets = batch
            .iter()
            .map(|t| double_q_target(&self.online, &self.target, t, self.config.discount))
            .collect::<Result<Vec<f64>>>()?;
        let samples: Vec<Sample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &target)| Sample {
                input: &t.state,
                action: t.action,
                target,
            })
            .collect();
        let (loss, grad) = self.online.loss_and_gradient(&samples)?;
        self.optimizer.update(self.online.parameters_mut(), &grad);
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_sync_period) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }
}
