//! Experiment configuration files.
//!
//! The format is TOML, so both `[section]` tables and dotted
//! `section.key = value` lines work:
//!
//! ```toml
//! sim.n_vehicles = 5
//! sim.mcs_table = "tables/mcs.txt"
//! agent.learning_rate = 1e-5
//! reward.alpha = 0.5
//! experiment.profile = "quick"
//! experiment.seed = 7
//! ```
//!
//! Unknown keys are rejected. Missing keys keep their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqn_agent::AgentConfig;
use crate::error::{Error, Result};
use crate::harness::Profile;
use crate::network_env::SimConfig;
use crate::reward::RewardParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub offline_episodes: Option<usize>,
    pub online_episodes: Option<usize>,
    pub test_episodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub sim: SimConfig,
    pub agent: AgentConfig,
    pub reward: RewardParams,
    pub experiment: ExperimentSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file. A relative `sim.mcs_table` path is resolved
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(table), Some(dir)) = (&cfg.sim.mcs_table, path.parent()) {
            if table.is_relative() {
                cfg.sim.mcs_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.agent.validate()?;
        self.reward.validate()?;
        for m in crate::network_env::ApplicationMode::ALL {
            if m.cd_sym > self.reward.cd_m {
                return Err(Error::Config(format!(
                    "mode {} has Chamfer distance {} above reward.cd_m = {}",
                    m.id, m.cd_sym, self.reward.cd_m
                )));
            }
        }
        Ok(())
    }

    pub fn mcs_table_path(&self) -> Option<&PathBuf> {
        self.sim.mcs_table.as_ref()
    }
}
