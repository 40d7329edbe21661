//! Per-step application-mode decisions behind one trait.
//!
//! Policies are created by name through [`PolicyRegistry`]. The built-in
//! entries are:
//!
//! | spec            | policy                                         |
//! |-----------------|------------------------------------------------|
//! | `constant:<id>` | [`ConstantPolicy`], fixed mode 0/1450/1451/1452 |
//! | `dql`           | [`DqlGreedy`], ε = 0 on a loaded checkpoint     |
//! | `dql-train`     | [`DqlTraining`], scheduled ε, owns the learner  |
//!
//! The DQL action index maps to modes as 0 → 1450, 1 → 1451, 2 → 1452;
//! checkpoints record this order and loading rejects any other.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use rand::RngCore;

use crate::dqn_agent::{select_action, AgentConfig, Checkpoint, DqnAgent, QNetwork};
use crate::error::{Error, Result};
use crate::network_env::{ApplicationMode, StateVector, DQL_ACTIONS};

pub fn dql_action_ids() -> [u16; 3] {
    DQL_ACTIONS.map(|m| m.id)
}

pub trait Policy: Send {
    /// Registry spec that recreates this policy, e.g. `constant:1451`.
    fn label(&self) -> String;

    fn decide(&mut self, state: &StateVector, rng: &mut dyn RngCore) -> Result<ApplicationMode>;

    /// The learning agent behind this policy, if it trains.
    fn learner(&mut self) -> Option<&mut DqnAgent> {
        None
    }

    /// Called at the start of every episode with the phase-relative index.
    fn begin_episode(&mut self, _episode: usize) {}

    /// Exploration rate in force for the current episode.
    fn epsilon(&self) -> f64 {
        0.0
    }

    /// Disables learning for the rest of the policy's life.
    fn freeze(&mut self) {}

    /// Checksum of any learnable parameters.
    fn weights_checksum(&self) -> Option<u64> {
        None
    }
}

impl fmt::Debug for dyn Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Policy({})", self.label())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy {
    mode: ApplicationMode,
}

impl ConstantPolicy {
    pub fn new(mode_id: u16) -> Result<Self> {
        Ok(Self {
            mode: ApplicationMode::from_id(mode_id)?,
        })
    }

    pub fn mode(&self) -> ApplicationMode {
        self.mode
    }
}

impl Policy for ConstantPolicy {
    fn label(&self) -> String {
        format!("constant:{}", self.mode.id)
    }

    fn decide(&mut self, _state: &StateVector, _rng: &mut dyn RngCore) -> Result<ApplicationMode> {
        Ok(self.mode)
    }
}

fn check_action_order(ckpt: &Checkpoint) -> Result<()> {
    if ckpt.action_ids != dql_action_ids() {
        return Err(Error::Checkpoint(format!(
            "checkpoint maps actions to modes {:?}, expected {:?}",
            ckpt.action_ids,
            dql_action_ids()
        )));
    }
    Ok(())
}

/// Greedy (ε = 0) decisions from a fixed network.
#[derive(Debug, Clone)]
pub struct DqlGreedy {
    net: QNetwork,
}

impl DqlGreedy {
    pub fn new(net: QNetwork) -> Result<Self> {
        if net.output_dim() != DQL_ACTIONS.len() {
            return Err(Error::Config(format!(
                "DQL policy needs {} outputs, network has {}",
                DQL_ACTIONS.len(),
                net.output_dim()
            )));
        }
        Ok(Self { net })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        check_action_order(ckpt)?;
        Self::new(QNetwork::from_parameters(&ckpt.layer_sizes, ckpt.online.clone())?)
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }
}

impl Policy for DqlGreedy {
    fn label(&self) -> String {
        "dql".into()
    }

    fn decide(&mut self, state: &StateVector, rng: &mut dyn RngCore) -> Result<ApplicationMode> {
        let a = select_action(&self.net, state.as_slice(), 0.0, rng)?;
        Ok(DQL_ACTIONS[a])
    }

    fn weights_checksum(&self) -> Option<u64> {
        Some(self.net.checksum())
    }
}

/// ε-greedy decisions from a learning agent. With a forced action every
/// decision returns that action, as in the offline phase.
#[derive(Debug, Clone)]
pub struct DqlTraining {
    agent: DqnAgent,
    schedule: crate::dqn_agent::EpsilonSchedule,
    epsilon: f64,
    forced: Option<usize>,
}

impl DqlTraining {
    pub fn new(agent: DqnAgent, schedule: crate::dqn_agent::EpsilonSchedule) -> Result<Self> {
        if agent.online().output_dim() != DQL_ACTIONS.len() {
            return Err(Error::Config("DQL agent must have 3 outputs".into()));
        }
        Ok(Self {
            epsilon: schedule.at(0),
            agent,
            schedule,
            forced: None,
        })
    }

    pub fn force_action(&mut self, action: Option<usize>) {
        self.forced = action;
    }

    pub fn agent(&self) -> &DqnAgent {
        &self.agent
    }

    pub fn into_agent(self) -> DqnAgent {
        self.agent
    }
}

impl Policy for DqlTraining {
    fn label(&self) -> String {
        "dql-train".into()
    }

    fn decide(&mut self, state: &StateVector, rng: &mut dyn RngCore) -> Result<ApplicationMode> {
        let a = match self.forced {
            Some(a) => a,
            None => select_action(self.agent.online(), state.as_slice(), self.epsilon, rng)?,
        };
        Ok(DQL_ACTIONS[a])
    }

    fn learner(&mut self) -> Option<&mut DqnAgent> {
        Some(&mut self.agent)
    }

    fn begin_episode(&mut self, episode: usize) {
        self.epsilon = self.schedule.at(episode);
    }

    fn epsilon(&self) -> f64 {
        if self.forced.is_some() {
            0.0
        } else {
            self.epsilon
        }
    }

    fn freeze(&mut self) {
        self.agent.freeze();
    }

    fn weights_checksum(&self) -> Option<u64> {
        Some(self.agent.online().checksum())
    }
}

/// Inputs a factory may need beyond the spec's argument.
#[derive(Debug, Clone, Default)]
pub struct PolicyArgs {
    pub checkpoint: Option<PathBuf>,
    pub agent: AgentConfig,
    pub online_episodes: usize,
}

pub type PolicyFactory = Box<dyn Fn(Option<&str>, &PolicyArgs) -> Result<Box<dyn Policy>> + Send + Sync>;

/// Name → factory map. A spec is `name` or `name:argument`.
pub struct PolicyRegistry {
    factories: BTreeMap<String, PolicyFactory>,
}

impl fmt::Debug for PolicyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolicyRegistry")
            .field("names", &self.names())
            .finish()
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("constant", |arg, _| {
            let id = arg
                .ok_or_else(|| Error::Config("constant policy needs a mode, e.g. constant:1451".into()))?;
            let id: u16 = id
                .parse()
                .map_err(|_| Error::Config(format!("bad mode id {id:?}")))?;
            Ok(Box::new(ConstantPolicy::new(id)?))
        });
        reg.register("dql", |arg, args| {
            reject_arg("dql", arg)?;
            let path = args
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("the dql policy needs --checkpoint".into()))?;
            Ok(Box::new(DqlGreedy::from_checkpoint(&Checkpoint::load(path)?)?))
        });
        reg.register("dql-train", |arg, args| {
            reject_arg("dql-train", arg)?;
            let agent = match &args.checkpoint {
                Some(path) => {
                    let ckpt = Checkpoint::load(path)?;
                    check_action_order(&ckpt)?;
                    DqnAgent::from_checkpoint(args.agent.clone(), &ckpt)?
                }
                None => DqnAgent::new(args.agent.clone())?,
            };
            let schedule = args.agent.epsilon_schedule(args.online_episodes);
            Ok(Box::new(DqlTraining::new(agent, schedule)?))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(Option<&str>, &PolicyArgs) -> Result<Box<dyn Policy>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_owned(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn create(&self, spec: &str, args: &PolicyArgs) -> Result<Box<dyn Policy>> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown policy {name:?} (known: {})",
                self.names().join(", ")
            ))
        })?;
        factory(arg, args)
    }
}

fn reject_arg(name: &str, arg: Option<&str>) -> Result<()> {
    match arg {
        Some(a) => Err(Error::Config(format!("policy {name} takes no argument, got {a:?}"))),
        None => Ok(()),
    }
}

/// Convenience: the spec → policy decision for one state.
pub fn decide(policy: &mut dyn Policy, state: &StateVector, rng: &mut dyn RngCore) -> Result<ApplicationMode> {
    policy.decide(state, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn_agent::DEFAULT_LAYER_SIZES;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn any_state() -> StateVector {
        StateVector([0.3; 8])
    }

    #[test]
    fn constant_returns_its_mode() {
        let reg = PolicyRegistry::with_builtins();
        let mut p = reg.create("constant:1452", &PolicyArgs::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.decide(&any_state(), &mut rng).unwrap().id, 1452);
        assert_eq!(p.label(), "constant:1452");
        assert!(p.learner().is_none());
    }

    #[test]
    fn greedy_follows_q_values() {
        let mut net = QNetwork::zeros(&DEFAULT_LAYER_SIZES).unwrap();
        net.layer_bias_mut(2).copy_from_slice(&[0.0, 1.0, 0.0]);
        let mut p = DqlGreedy::new(net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.decide(&any_state(), &mut rng).unwrap().id, 1451);
    }

    #[test]
    fn registry_errors() {
        let reg = PolicyRegistry::with_builtins();
        let args = PolicyArgs::default();
        assert!(reg.create("constant", &args).is_err());
        assert!(reg.create("constant:7", &args).is_err());
        assert!(reg.create("constant:abc", &args).is_err());
        assert!(reg.create("dql", &args).is_err());
        assert!(reg.create("dql:3", &args).is_err());
        assert!(reg.create("random", &args).is_err());
        assert_eq!(reg.names(), vec!["constant", "dql", "dql-train"]);
    }

    #[test]
    fn checkpoint_loading() {
        let dir = tempfile::tempdir().unwrap();
        let agent = DqnAgent::new(AgentConfig::default()).unwrap();
        let good = dir.path().join("good.ckpt");
        agent.to_checkpoint(&dql_action_ids()).save(&good).unwrap();
        let reordered = dir.path().join("reordered.ckpt");
        agent.to_checkpoint(&[1452, 1451, 1450]).save(&reordered).unwrap();
        let corrupt = dir.path().join("corrupt.ckpt");
        std::fs::write(&corrupt, "pqos-checkpoint 1\nactions 1450\n").unwrap();

        let reg = PolicyRegistry::with_builtins();
        let args = |p: &std::path::Path| PolicyArgs {
            checkpoint: Some(p.to_path_buf()),
            ..Default::default()
        };
        let p = reg.create("dql", &args(&good)).unwrap();
        assert_eq!(p.weights_checksum(), Some(agent.online().checksum()));
        assert!(matches!(reg.create("dql", &args(&reordered)), Err(Error::Checkpoint(_))));
        assert!(matches!(reg.create("dql", &args(&corrupt)), Err(Error::Checkpoint(_))));
        let mut t = reg.create("dql-train", &args(&good)).unwrap();
        assert!(t.learner().is_some());
    }

    #[test]
    fn custom_registration() {
        let mut reg = PolicyRegistry::empty();
        reg.register("always-raw", |_, _| Ok(Box::new(ConstantPolicy::new(0)?)));
        let mut p = reg.create("always-raw", &PolicyArgs::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.decide(&any_state(), &mut rng).unwrap(), ApplicationMode::RAW);
    }

    #[test]
    fn forced_action_overrides_exploration() {
        let agent = DqnAgent::new(AgentConfig::default()).unwrap();
        let mut p = DqlTraining::new(agent, crate::dqn_agent::EpsilonSchedule::constant(1.0)).unwrap();
        p.force_action(Some(2));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(p.decide(&any_state(), &mut rng).unwrap().id, 1452);
        }
        assert_eq!(p.epsilon(), 0.0);
    }

    proptest! {
        #[test]
        fn constant_ignores_state(features in prop::array::uniform8(0.0f64..=1.0), id in prop::sample::select(vec![0u16, 1450, 1451, 1452])) {
            let mut p = ConstantPolicy::new(id).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            prop_assert_eq!(p.decide(&StateVector(features), &mut rng).unwrap().id, id);
        }
    }
}
