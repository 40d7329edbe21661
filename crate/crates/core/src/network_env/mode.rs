use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A LiDAR compression/segmentation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplicationMode {
    pub id: u16,
    /// Mean compressed frame size, KB (1 KB = 1000 bytes).
    pub mean_payload_kb: f64,
    /// Symmetric Chamfer distance between the raw and the delivered cloud.
    pub cd_sym: f64,
}

impl ApplicationMode {
    /// Raw point cloud, no segmentation, no compression.
    pub const RAW: Self = Self::new(0, 3200.0, 0.0);
    /// Compressed, full scene.
    pub const COMPRESSED: Self = Self::new(1450, 200.0, 0.000044);
    /// Road points removed, then compressed.
    pub const NO_ROAD: Self = Self::new(1451, 104.0, 5.476881);
    /// Only dynamic objects kept, then compressed.
    pub const DYNAMIC_ONLY: Self = Self::new(1452, 17.0, 35.634660);

    pub const ALL: [Self; 4] = [Self::RAW, Self::COMPRESSED, Self::NO_ROAD, Self::DYNAMIC_ONLY];

    const fn new(id: u16, mean_payload_kb: f64, cd_sym: f64) -> Self {
        Self {
            id,
            mean_payload_kb,
            cd_sym,
        }
    }

    pub fn from_id(id: u16) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Domain(format!("unknown application mode {id} (known: 0, 1450, 1451, 1452)")))
    }
}

impl fmt::Display for ApplicationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

/// The agent's action set, in action-index order.
pub const DQL_ACTIONS: [ApplicationMode; 3] = [
    ApplicationMode::COMPRESSED,
    ApplicationMode::NO_ROAD,
    ApplicationMode::DYNAMIC_ONLY,
];

pub fn action_index(mode: ApplicationMode) -> Option<usize> {
    DQL_ACTIONS.iter().position(|m| m.id == mode.id)
}
