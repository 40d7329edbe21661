use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network_env::StepKpis;

use super::Phase;

/// One vehicle in one control period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub vehicle: usize,
    pub mode: u16,
    pub cd: f64,
    pub qos_met: bool,
    /// `None` when the vehicle generated no traffic in the period.
    pub reward: Option<f64>,
    pub kpis: StepKpis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub policy: String,
    pub phase: Phase,
    pub episode: usize,
    pub epsilon: f64,
    pub n_vehicles: usize,
    pub steps: usize,
    /// Decisions per mode id.
    pub action_counts: BTreeMap<u16, usize>,
    pub transitions: usize,
    pub mean_reward: f64,
    pub qos_fraction: f64,
    pub mean_loss: Option<f64>,
    /// Per-step rows; empty when the run did not keep them.
    pub rows: Vec<StepRow>,
}

impl EpisodeRecord {
    pub fn decisions(&self) -> usize {
        self.action_counts.values().sum()
    }

    /// Share of decisions that chose `mode`.
    pub fn action_fraction(&self, mode: u16) -> f64 {
        let n = self.decisions();
        if n == 0 {
            return 0.0;
        }
        self.action_counts.get(&mode).copied().unwrap_or(0) as f64 / n as f64
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Precondition("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Tukey box-plot statistics: whiskers reach the most extreme samples within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub samples: usize,
    pub whisker_low: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub whisker_high: f64,
    pub mean: f64,
}

impl BoxStats {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let v = sorted(values);
        let p25 = quantile(&v, 0.25)?;
        let median = quantile(&v, 0.5)?;
        let p75 = quantile(&v, 0.75)?;
        let iqr = p75 - p25;
        let (lo_fence, hi_fence) = (p25 - 1.5 * iqr, p75 + 1.5 * iqr);
        let whisker_low = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(p25);
        let whisker_high = v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(p75);
        Ok(Self {
            samples: v.len(),
            whisker_low,
            p25,
            median,
            p75,
            whisker_high,
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardStats {
    pub samples: usize,
    pub min: f64,
    pub p05: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
}

impl RewardStats {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let v = sorted(values);
        Ok(Self {
            samples: v.len(),
            min: quantile(&v, 0.0)?,
            p05: quantile(&v, 0.05)?,
            p25: quantile(&v, 0.25)?,
            median: quantile(&v, 0.5)?,
            p75: quantile(&v, 0.75)?,
            p95: quantile(&v, 0.95)?,
            max: quantile(&v, 1.0)?,
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

/// Aggregate test-phase metrics of one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub policy: String,
    pub episodes: usize,
    pub decisions: usize,
    /// Share of decisions per mode id.
    pub action_share: BTreeMap<u16, f64>,
    /// Share of rewarded vehicle-steps that met the QoS constraint.
    pub qos_fraction: f64,
    /// Normalized reward (`2r - 1`) over rewarded vehicle-steps.
    pub reward: RewardStats,
    pub delay: BoxStats,
}

/// Summary over the rows of `records` (all must belong to one policy).
pub fn summarize(records: &[EpisodeRecord]) -> Result<TestSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Precondition("no episodes to summarize".into()))?;
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    for rec in records {
        if rec.policy != first.policy {
            return Err(Error::Precondition(format!(
                "records mix policies {} and {}",
                first.policy, rec.policy
            )));
        }
        for (&m, &c) in &rec.action_counts {
            *counts.entry(m).or_default() += c;
        }
    }
    let decisions: usize = counts.values().sum();
    let rows = || records.iter().flat_map(|r| &r.rows);
    let rewards: Vec<f64> = rows().filter_map(|r| r.reward).map(|r| 2.0 * r - 1.0).collect();
    if rewards.is_empty() {
        return Err(Error::Precondition(
            "records hold no per-step rows with rewards".into(),
        ));
    }
    let met = rows().filter(|r| r.reward.is_some() && r.qos_met).count();
    Ok(TestSummary {
        policy: first.policy.clone(),
        episodes: records.len(),
        decisions,
        action_share: counts
            .iter()
            .map(|(&m, &c)| (m, c as f64 / decisions.max(1) as f64))
            .collect(),
        qos_fraction: met as f64 / rewards.len() as f64,
        reward: RewardStats::from_samples(rewards)?,
        delay: BoxStats::from_samples(rows().map(|r| r.kpis.delay_mean_ms))?,
    })
}
