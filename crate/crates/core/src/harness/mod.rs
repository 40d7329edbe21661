//! Experiment orchestration: offline training, online training and test
//! phases, plus CSV export of the results.
//!
//! Every random stream derives from the experiment seed and the phase, so
//! `(config, seed)` fixes all outputs. Test-phase episode seeds depend only
//! on the seed, never on the policy, which pairs policy comparisons on the
//! same channel and traffic realisations.

mod export;
mod records;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::dqn_agent::AgentConfig;
use crate::error::{Error, Result};
use crate::network_env::SimConfig;
use crate::reward::RewardParams;

pub use export::{
    emit_figures_csv, read_steps_csv, write_action_probability_csv, write_episodes_csv, write_steps_csv,
    write_summary_csv, FIGURE_FILES,
};
pub use records::{quantile, summarize, BoxStats, EpisodeRecord, RewardStats, StepRow, TestSummary};
pub use run::{
    run_offline_training, run_online_training, run_test, train_agent, TestOutcome,
    TrainingOutcome,
};

/// Preset episode lengths and counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 200-step episodes, 15 offline and 60 online episodes.
    Quick,
    /// 800-step episodes, 2,500 (one vehicle) or 500 (more) episodes per
    /// training phase.
    Paper,
}

impl Profile {
    pub fn episode_duration_s(self) -> f64 {
        match self {
            Profile::Quick => 20.0,
            Profile::Paper => 80.0,
        }
    }

    pub fn offline_episodes(self, n_vehicles: usize) -> usize {
        match self {
            Profile::Quick => 15,
            Profile::Paper if n_vehicles <= 1 => 2500,
            Profile::Paper => 500,
        }
    }

    pub fn online_episodes(self, n_vehicles: usize) -> usize {
        match self {
            Profile::Quick => 60,
            Profile::Paper => self.offline_episodes(n_vehicles),
        }
    }

    pub fn test_episodes(self) -> usize {
        100
    }

    pub fn episodes(self, phase: Phase, n_vehicles: usize) -> usize {
        match phase {
            Phase::Offline => self.offline_episodes(n_vehicles),
            Phase::Online => self.online_episodes(n_vehicles),
            Phase::Test => self.test_episodes(),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile {other:?} (quick|paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Online,
    Test,
}

impl Phase {
    /// Seed label separating the phases' random streams.
    pub(crate) fn tag(self) -> u64 {
        match self {
            Phase::Offline => 1,
            Phase::Online => 2,
            Phase::Test => 3,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Offline => "offline",
            Phase::Online => "online",
            Phase::Test => "test",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offline" => Ok(Phase::Offline),
            "online" => Ok(Phase::Online),
            "test" => Ok(Phase::Test),
            other => Err(Error::Domain(format!("unknown phase {other:?}"))),
        }
    }
}

/// Everything one phase run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sim: SimConfig,
    pub agent: AgentConfig,
    pub reward: RewardParams,
    pub phase: Phase,
    pub episodes: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Default cell and agent parameters with the profile's episode length
    /// and count.
    pub fn preset(profile: Profile, phase: Phase, n_vehicles: usize, alpha: f64, seed: u64) -> Self {
        let sim = SimConfig {
            n_vehicles,
            episode_duration_s: profile.episode_duration_s(),
            ..SimConfig::default()
        };
        Self {
            sim,
            agent: AgentConfig::default(),
            reward: RewardParams {
                alpha,
                ..RewardParams::default()
            },
            phase,
            episodes: profile.episodes(phase, n_vehicles),
            seed,
        }
    }

    /// Spec for `phase` from a config file. The profile sets the episode
    /// length and count unless the file overrides them.
    pub fn from_config(cfg: &ConfigFile, profile: Profile, phase: Phase, seed: u64) -> Self {
        let mut sim = cfg.sim.clone();
        sim.episode_duration_s = profile.episode_duration_s();
        let episodes = match phase {
            Phase::Offline => cfg.experiment.offline_episodes,
            Phase::Online => cfg.experiment.online_episodes,
            Phase::Test => cfg.experiment.test_episodes,
        }
        .unwrap_or_else(|| profile.episodes(phase, sim.n_vehicles));
        Self {
            sim,
            agent: cfg.agent.clone(),
            reward: cfg.reward,
            phase,
            episodes,
            seed,
        }
    }

    /// Same experiment, different phase (episode count from `profile`).
    pub fn with_phase(&self, profile: Profile, phase: Phase) -> Self {
        Self {
            phase,
            episodes: profile.episodes(phase, self.sim.n_vehicles),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episode count must be positive".into()));
        }
        self.sim.validate()?;
        self.agent.validate()?;
        self.reward.validate()
    }

    pub(crate) fn episode_seed(&self, episode: usize) -> u64 {
        crate::seeds::derive(self.seed, &[self.phase.tag(), episode as u64])
    }

    /// Agent config with its RNG seed tied to this experiment and phase.
    pub fn seeded_agent_config(&self) -> AgentConfig {
        AgentConfig {
            rng_seed: crate::seeds::derive(self.seed, &[0xA6E7, self.agent.rng_seed, self.phase.tag()]),
            ..self.agent.clone()
        }
    }
}
