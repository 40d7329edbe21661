//! CSV writers and the reader that lets `export` rebuild figures from a
//! saved `steps.csv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network_env::{ApplicationMode, StepKpis};

use super::records::{BoxStats, EpisodeRecord, RewardStats, StepRow, TestSummary};
use super::Phase;

/// Files written by [`emit_figures_csv`].
pub const FIGURE_FILES: [&str; 5] = [
    "action_probability.csv",
    "cd_distribution.csv",
    "qos_distribution.csv",
    "delay_boxplot.csv",
    "reward_distribution.csv",
];

#[derive(Debug, Serialize, Deserialize)]
struct StepCsvRow {
    policy: String,
    phase: Phase,
    episode: usize,
    epsilon: f64,
    step: usize,
    vehicle: usize,
    action: u16,
    cd: f64,
    mcs_index: u8,
    ofdm_symbols_used: u32,
    sinr_db: f64,
    delay_mean_ms: f64,
    delay_max_ms: f64,
    delay_min_ms: f64,
    delay_std_ms: f64,
    prr: f64,
    packets_generated: u64,
    packets_delivered: u64,
    packets_delivered_total: u64,
    packets_dropped: u64,
    packets_queued: u64,
    frames_generated: u32,
    payload_bytes: u64,
    qos_met: bool,
    reward: Option<f64>,
    reward_normalized: Option<f64>,
}

impl StepCsvRow {
    fn new(rec: &EpisodeRecord, row: &StepRow) -> Self {
        let k = &row.kpis;
        Self {
            policy: rec.policy.clone(),
            phase: rec.phase,
            episode: rec.episode,
            epsilon: rec.epsilon,
            step: row.step,
            vehicle: row.vehicle,
            action: row.mode,
            cd: row.cd,
            mcs_index: k.mcs_index,
            ofdm_symbols_used: k.ofdm_symbols_used,
            sinr_db: k.sinr_db,
            delay_mean_ms: k.delay_mean_ms,
            delay_max_ms: k.delay_max_ms,
            delay_min_ms: k.delay_min_ms,
            delay_std_ms: k.delay_std_ms,
            prr: k.prr,
            packets_generated: k.packets_generated,
            packets_delivered: k.packets_delivered,
            packets_delivered_total: k.packets_delivered_total,
            packets_dropped: k.packets_dropped,
            packets_queued: k.packets_queued,
            frames_generated: k.frames_generated,
            payload_bytes: k.payload_bytes,
            qos_met: row.qos_met,
            reward: row.reward,
            reward_normalized: row.reward.map(|r| 2.0 * r - 1.0),
        }
    }

    fn into_row(self) -> StepRow {
        StepRow {
            step: self.step,
            vehicle: self.vehicle,
            mode: self.action,
            cd: self.cd,
            qos_met: self.qos_met,
            reward: self.reward,
            kpis: StepKpis {
                mcs_index: self.mcs_index,
                ofdm_symbols_used: self.ofdm_symbols_used,
                sinr_db: self.sinr_db,
                delay_mean_ms: self.delay_mean_ms,
                delay_max_ms: self.delay_max_ms,
                delay_min_ms: self.delay_min_ms,
                delay_std_ms: self.delay_std_ms,
                prr: self.prr,
                packets_generated: self.packets_generated,
                packets_delivered: self.packets_delivered,
                packets_delivered_total: self.packets_delivered_total,
                packets_dropped: self.packets_dropped,
                packets_queued: self.packets_queued,
                frames_generated: self.frames_generated,
                payload_bytes: self.payload_bytes,
            },
        }
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_all<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line per vehicle-step of every record that kept its rows.
pub fn write_steps_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_all(
        path,
        records
            .iter()
            .flat_map(|rec| rec.rows.iter().map(move |row| StepCsvRow::new(rec, row))),
    )
}

/// Rebuilds episode records (with rows) from a `steps.csv`.
pub fn read_steps_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut records: Vec<EpisodeRecord> = Vec::new();
    for row in reader.deserialize::<StepCsvRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let same = records.last().is_some_and(|r| {
            r.policy == row.policy && r.phase == row.phase && r.episode == row.episode
        });
        if !same {
            records.push(EpisodeRecord {
                policy: row.policy.clone(),
                phase: row.phase,
                episode: row.episode,
                epsilon: row.epsilon,
                n_vehicles: 0,
                steps: 0,
                action_counts: BTreeMap::new(),
                transitions: 0,
                mean_reward: 0.0,
                qos_fraction: 0.0,
                mean_loss: None,
                rows: Vec::new(),
            });
        }
        let rec = records.last_mut().expect("pushed above");
        *rec.action_counts.entry(row.action).or_default() += 1;
        rec.rows.push(row.into_row());
    }
    for rec in &mut records {
        rec.n_vehicles = rec.rows.iter().map(|r| r.vehicle + 1).max().unwrap_or(0);
        rec.steps = rec.rows.iter().map(|r| r.step + 1).max().unwrap_or(0);
        let rewarded: Vec<&StepRow> = rec.rows.iter().filter(|r| r.reward.is_some()).collect();
        if !rewarded.is_empty() {
            let n = rewarded.len() as f64;
            rec.mean_reward = rewarded.iter().filter_map(|r| r.reward).sum::<f64>() / n;
            rec.qos_fraction = rewarded.iter().filter(|r| r.qos_met).count() as f64 / n;
        }
    }
    Ok(records)
}

#[derive(Serialize)]
struct EpisodeCsvRow<'a> {
    policy: &'a str,
    phase: Phase,
    episode: usize,
    epsilon: f64,
    n_vehicles: usize,
    steps: usize,
    decisions: usize,
    transitions: usize,
    mean_reward: f64,
    qos_fraction: f64,
    mean_loss: Option<f64>,
    p_0: f64,
    p_1450: f64,
    p_1451: f64,
    p_1452: f64,
}

#[derive(Serialize)]
struct ActionProbabilityRow<'a> {
    policy: &'a str,
    phase: Phase,
    episode: usize,
    epsilon: f64,
    p_0: f64,
    p_1450: f64,
    p_1451: f64,
    p_1452: f64,
}

fn shares(rec: &EpisodeRecord) -> [f64; 4] {
    ApplicationMode::ALL.map(|m| rec.action_fraction(m.id))
}

pub fn write_episodes_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    write_all(
        path.as_ref(),
        records.iter().map(|rec| {
            let [p_0, p_1450, p_1451, p_1452] = shares(rec);
            EpisodeCsvRow {
                policy: &rec.policy,
                phase: rec.phase,
                episode: rec.episode,
                epsilon: rec.epsilon,
                n_vehicles: rec.n_vehicles,
                steps: rec.steps,
                decisions: rec.decisions(),
                transitions: rec.transitions,
                mean_reward: rec.mean_reward,
                qos_fraction: rec.qos_fraction,
                mean_loss: rec.mean_loss,
                p_0,
                p_1450,
                p_1451,
                p_1452,
            }
        }),
    )
}

#[derive(Serialize)]
struct CountRow<'a, K> {
    policy: &'a str,
    #[serde(rename = "value")]
    key: K,
    count: usize,
    fraction: f64,
}

#[derive(Serialize)]
struct BoxRow<'a> {
    policy: &'a str,
    samples: usize,
    whisker_low: f64,
    p25: f64,
    median: f64,
    p75: f64,
    whisker_high: f64,
    mean: f64,
}

impl<'a> BoxRow<'a> {
    fn new(policy: &'a str, s: BoxStats) -> Self {
        Self {
            policy,
            samples: s.samples,
            whisker_low: s.whisker_low,
            p25: s.p25,
            median: s.median,
            p75: s.p75,
            whisker_high: s.whisker_high,
            mean: s.mean,
        }
    }
}

#[derive(Serialize)]
struct RewardRow<'a> {
    policy: &'a str,
    samples: usize,
    min: f64,
    p05: f64,
    p25: f64,
    median: f64,
    p75: f64,
    p95: f64,
    max: f64,
    mean: f64,
}

impl<'a> RewardRow<'a> {
    fn new(policy: &'a str, s: RewardStats) -> Self {
        Self {
            policy,
            samples: s.samples,
            min: s.min,
            p05: s.p05,
            p25: s.p25,
            median: s.median,
            p75: s.p75,
            p95: s.p95,
            max: s.max,
            mean: s.mean,
        }
    }
}

/// Per-episode action shares, the series behind the action-probability plot.
pub fn write_action_probability_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    write_all(
        path.as_ref(),
        records.iter().map(|rec| {
            let [p_0, p_1450, p_1451, p_1452] = shares(rec);
            ActionProbabilityRow {
                policy: &rec.policy,
                phase: rec.phase,
                episode: rec.episode,
                epsilon: rec.epsilon,
                p_0,
                p_1450,
                p_1451,
                p_1452,
            }
        }),
    )
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    policy: &'a str,
    episodes: usize,
    decisions: usize,
    qos_fraction: f64,
    p_0: f64,
    p_1450: f64,
    p_1451: f64,
    p_1452: f64,
    reward_median: f64,
    reward_mean: f64,
    reward_max: f64,
    delay_median_ms: f64,
    delay_mean_ms: f64,
}

/// One line per test summary.
pub fn write_summary_csv(summaries: &[TestSummary], path: impl AsRef<Path>) -> Result<()> {
    write_all(
        path.as_ref(),
        summaries.iter().map(|s| {
            let [p_0, p_1450, p_1451, p_1452] =
                ApplicationMode::ALL.map(|m| s.action_share.get(&m.id).copied().unwrap_or(0.0));
            SummaryRow {
                policy: &s.policy,
                episodes: s.episodes,
                decisions: s.decisions,
                qos_fraction: s.qos_fraction,
                p_0,
                p_1450,
                p_1451,
                p_1452,
                reward_median: s.reward.median,
                reward_mean: s.reward.mean,
                reward_max: s.reward.max,
                delay_median_ms: s.delay.median,
                delay_mean_ms: s.delay.mean,
            }
        }),
    )
}

/// Records grouped by policy in order of first appearance.
fn by_policy(records: &[EpisodeRecord]) -> Vec<(&str, Vec<&EpisodeRecord>)> {
    let mut groups: Vec<(&str, Vec<&EpisodeRecord>)> = Vec::new();
    for rec in records {
        match groups.iter_mut().find(|(p, _)| *p == rec.policy) {
            Some((_, g)) => g.push(rec),
            None => groups.push((&rec.policy, vec![rec])),
        }
    }
    groups
}

/// Writes the figure tables of [`FIGURE_FILES`] into `dir` and returns their
/// paths. Distribution tables cover only records that kept per-step rows.
pub fn emit_figures_csv(records: &[EpisodeRecord], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Precondition("no episode records to export".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = FIGURE_FILES.iter().map(|f| dir.join(f)).collect();
    let groups = by_policy(records);

    write_action_probability_csv(records, &paths[0])?;

    let mut cd_rows = Vec::new();
    let mut qos_rows = Vec::new();
    let mut delay_rows = Vec::new();
    let mut reward_rows = Vec::new();
    for (policy, recs) in &groups {
        let rows: Vec<&StepRow> = recs.iter().flat_map(|r| &r.rows).collect();
        if rows.is_empty() {
            continue;
        }
        let total = rows.len() as f64;
        for mode in ApplicationMode::ALL {
            let count = rows.iter().filter(|r| r.mode == mode.id).count();
            if count > 0 {
                cd_rows.push(CountRow {
                    policy,
                    key: mode.cd_sym,
                    count,
                    fraction: count as f64 / total,
                });
            }
        }
        let rewarded: Vec<&&StepRow> = rows.iter().filter(|r| r.reward.is_some()).collect();
        for met in [true, false] {
            let count = rewarded.iter().filter(|r| r.qos_met == met).count();
            qos_rows.push(CountRow {
                policy,
                key: met,
                count,
                fraction: if rewarded.is_empty() { 0.0 } else { count as f64 / rewarded.len() as f64 },
            });
        }
        delay_rows.push(BoxRow::new(
            policy,
            BoxStats::from_samples(rows.iter().map(|r| r.kpis.delay_mean_ms))?,
        ));
        if !rewarded.is_empty() {
            reward_rows.push(RewardRow::new(
                policy,
                RewardStats::from_samples(
                    rewarded.iter().filter_map(|r| r.reward).map(|r| 2.0 * r - 1.0),
                )?,
            ));
        }
    }
    write_all(&paths[1], cd_rows)?;
    write_all(&paths[2], qos_rows)?;
    write_all(&paths[3], delay_rows)?;
    write_all(&paths[4], reward_rows)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(policy: &str, episode: usize, modes: &[u16]) -> EpisodeRecord {
        let rows: Vec<StepRow> = modes
            .iter()
            .enumerate()
            .map(|(i, &m)| StepRow {
                step: i,
                vehicle: 0,
                mode: m,
                cd: ApplicationMode::from_id(m).unwrap().cd_sym,
                qos_met: i % 2 == 0,
                reward: Some(if i % 2 == 0 { 0.5 + 0.1 * i as f64 / 7.0 } else { 0.0 }),
                kpis: StepKpis {
                    delay_mean_ms: 10.0 + i as f64 / 3.0,
                    sinr_db: 1.0 / 3.0,
                    prr: 1.0,
                    packets_generated: 12,
                    ..StepKpis::default()
                },
            })
            .collect();
        let mut action_counts = BTreeMap::new();
        for &m in modes {
            *action_counts.entry(m).or_default() += 1;
        }
        EpisodeRecord {
            policy: policy.into(),
            phase: Phase::Test,
            episode,
            epsilon: 0.0,
            n_vehicles: 1,
            steps: modes.len(),
            action_counts,
            transitions: 0,
            mean_reward: 0.0,
            qos_fraction: 0.0,
            mean_loss: None,
            rows,
        }
    }

    #[test]
    fn steps_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.csv");
        let recs = vec![record("dql", 0, &[1450, 1451, 1452]), record("dql", 1, &[1452, 1452])];
        write_steps_csv(&recs, &path).unwrap();
        let back = read_steps_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.action_counts, b.action_counts);
            assert_eq!(b.steps, a.steps);
        }
    }

    #[test]
    fn figures_written() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record("dql", 0, &[1450, 1451, 1452, 1452]), record("constant:0", 0, &[0, 0])];
        let paths = emit_figures_csv(&recs, dir.path()).unwrap();
        assert_eq!(paths.len(), 5);
        let ap = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(ap.starts_with("policy,phase,episode,epsilon,p_0,p_1450,p_1451,p_1452\n"));
        assert!(ap.contains("dql,test,0,0.0,0.0,0.25,0.25,0.5"));
        let cd = std::fs::read_to_string(&paths[1]).unwrap();
        assert!(cd.contains("dql,35.63466,2,0.5"));
        assert!(cd.contains("constant:0,0.0,2,1.0"));
        let bx = std::fs::read_to_string(&paths[3]).unwrap();
        assert!(bx.starts_with("policy,samples,whisker_low,p25,median,p75,whisker_high,mean\n"));
        assert!(emit_figures_csv(&[], dir.path()).is_err());
    }
}
