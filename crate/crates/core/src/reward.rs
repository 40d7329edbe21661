//! QoS predicate and the piece-wise QoS/QoE reward.
//!
//! When the period meets QoS (mean delay strictly below the delay bound and
//! every generated packet received) the reward is
//!
//! ```text
//! R = (1 - alpha) * (delta_m - delay) / delta_m + alpha * (cd_m - cd) / cd_m
//! ```
//!
//! and zero otherwise. Learning always uses this raw value in `[0, 1]`;
//! [`normalize_reward`] maps it to `[-1, 1]` for reporting only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// QoE weight in `[0, 1]`; `1 - alpha` weighs the delay term.
    pub alpha: f64,
    /// Maximum tolerated mean delay, ms.
    pub delta_m: f64,
    /// Maximum tolerated Chamfer distance.
    pub cd_m: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            delta_m: 50.0,
            cd_m: 45.0,
        }
    }
}

impl RewardParams {
    pub fn new(alpha: f64, delta_m: f64, cd_m: f64) -> Result<Self> {
        let params = Self {
            alpha,
            delta_m,
            cd_m,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "reward.alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.delta_m > 0.0 && self.delta_m.is_finite()) {
            return Err(Error::Config(format!(
                "reward.delta_m must be positive, got {}",
                self.delta_m
            )));
        }
        if !(self.cd_m > 0.0 && self.cd_m.is_finite()) {
            return Err(Error::Config(format!(
                "reward.cd_m must be positive, got {}",
                self.cd_m
            )));
        }
        Ok(())
    }
}

/// QoS/QoE observation for one vehicle over one control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSample {
    /// Packet reception ratio in `[0, 1]`.
    pub prr: f64,
    /// Mean delay of packets delivered in the period, ms.
    pub mean_delay: f64,
    /// Chamfer distance of the active application mode.
    pub cd: f64,
}

impl QosSample {
    pub fn new(prr: f64, mean_delay: f64, cd: f64) -> Self {
        Self {
            prr,
            mean_delay,
            cd,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prr) {
            return Err(Error::Domain(format!("prr must lie in [0, 1], got {}", self.prr)));
        }
        if !(self.mean_delay >= 0.0 && self.mean_delay.is_finite()) {
            return Err(Error::Domain(format!(
                "mean delay must be finite and non-negative, got {}",
                self.mean_delay
            )));
        }
        if !(self.cd >= 0.0 && self.cd.is_finite()) {
            return Err(Error::Domain(format!(
                "Chamfer distance must be finite and non-negative, got {}",
                self.cd
            )));
        }
        Ok(())
    }
}

/// True iff the mean delay is strictly below `delta_m` and PRR is exactly 1.
pub fn qos_met(sample: &QosSample, params: &RewardParams) -> bool {
    sample.mean_delay < params.delta_m && sample.prr == 1.0
}

pub fn compute_reward(sample: &QosSample, params: &RewardParams) -> Result<f64> {
    sample.validate()?;
    if sample.cd > params.cd_m {
        return Err(Error::Config(format!(
            "mode Chamfer distance {} exceeds the tolerated maximum {}",
            sample.cd, params.cd_m
        )));
    }
    if !qos_met(sample, params) {
        return Ok(0.0);
    }
    let delay_term = (params.delta_m - sample.mean_delay) / params.delta_m;
    let qoe_term = (params.cd_m - sample.cd) / params.cd_m;
    Ok((1.0 - params.alpha) * delay_term + params.alpha * qoe_term)
}

/// Maps a raw reward in `[0, 1]` to `[-1, 1]` via `2r - 1`.
pub fn normalize_reward(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!(
            "reward must lie in [0, 1] to normalize, got {r}"
        )));
    }
    Ok(2.0 * r - 1.0)
}
