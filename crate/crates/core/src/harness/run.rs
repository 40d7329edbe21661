use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dqn_agent::{DqnAgent, EpsilonSchedule, Transition};
use crate::error::{Error, Result};
use crate::network_env::{action_index, NetworkEnv};
use crate::policies::{DqlTraining, Policy};
use crate::reward::{compute_reward, qos_met};
use crate::seeds;

use super::records::{summarize, EpisodeRecord, StepRow, TestSummary};
use super::{ExperimentSpec, Phase};

#[derive(Debug)]
pub struct TrainingOutcome {
    pub agent: DqnAgent,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug)]
pub struct TestOutcome {
    pub records: Vec<EpisodeRecord>,
    pub summary: TestSummary,
}

fn decision_rng(spec: &ExperimentSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seeds::derive(spec.seed, &[0xDEC1, spec.phase.tag()]))
}

fn check_phase(spec: &ExperimentSpec, expected: Phase) -> Result<()> {
    if spec.phase != expected {
        return Err(Error::Precondition(format!(
            "{expected} runner called with a {} spec",
            spec.phase
        )));
    }
    spec.validate()
}

/// Plays one episode. With `learn`, every vehicle-step whose mode is in the
/// agent's action set becomes a transition and the agent takes one gradient
/// step per control period.
fn run_episode(
    spec: &ExperimentSpec,
    env: &mut NetworkEnv,
    episode: usize,
    policy: &mut dyn Policy,
    rng: &mut ChaCha8Rng,
    learn: bool,
    keep_rows: bool,
) -> Result<EpisodeRecord> {
    policy.begin_episode(episode);
    let mut states = env.reset(spec.episode_seed(episode));
    let n = env.n_vehicles();
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    let mut rows = Vec::new();
    let (mut reward_sum, mut rewarded, mut met) = (0.0, 0usize, 0usize);
    let (mut loss_sum, mut losses) = (0.0, 0usize);
    let mut transitions = 0;
    let mut steps = 0;
    let mut actions = Vec::with_capacity(n);
    while !env.is_done() {
        actions.clear();
        for s in &states {
            actions.push(policy.decide(s, rng)?);
        }
        let out = env.step(&actions)?;
        for v in 0..n {
            let mode = actions[v];
            *counts.entry(mode.id).or_default() += 1;
            let (reward, ok) = match &out.qos[v] {
                Some(q) => (Some(compute_reward(q, &spec.reward)?), qos_met(q, &spec.reward)),
                None => (None, false),
            };
            if let Some(r) = reward {
                reward_sum += r;
                rewarded += 1;
                met += usize::from(ok);
            }
            if learn {
                if let (Some(r), Some(a)) = (reward, action_index(mode)) {
                    let label = policy.label();
                    let agent = policy.learner().ok_or_else(|| {
                        Error::Precondition(format!("policy {label} cannot learn"))
                    })?;
                    agent.observe(Transition {
                        state: states[v].as_slice().to_vec(),
                        action: a,
                        reward: r,
                        next_state: out.states[v].as_slice().to_vec(),
                        terminal: false,
                    })?;
                    transitions += 1;
                }
            }
            if keep_rows {
                rows.push(StepRow {
                    step: steps,
                    vehicle: v,
                    mode: mode.id,
                    cd: mode.cd_sym,
                    qos_met: ok,
                    reward,
                    kpis: out.kpis[v],
                });
            }
        }
        if learn {
            if let Some(agent) = policy.learner() {
                if let Some(loss) = agent.train_step()? {
                    loss_sum += loss;
                    losses += 1;
                }
            }
        }
        states = out.states;
        steps += 1;
    }
    Ok(EpisodeRecord {
        policy: policy.label(),
        phase: spec.phase,
        episode,
        epsilon: policy.epsilon(),
        n_vehicles: n,
        steps,
        action_counts: counts,
        transitions,
        mean_reward: if rewarded > 0 { reward_sum / rewarded as f64 } else { 0.0 },
        qos_fraction: if rewarded > 0 { met as f64 / rewarded as f64 } else { 0.0 },
        mean_loss: (losses > 0).then(|| loss_sum / losses as f64),
        rows,
    })
}

fn run_training(spec: &ExperimentSpec, mut policy: DqlTraining, forced: bool) -> Result<TrainingOutcome> {
    let mut env = NetworkEnv::new(spec.sim.clone())?;
    let mut rng = decision_rng(spec);
    let mut records = Vec::with_capacity(spec.episodes);
    for ep in 0..spec.episodes {
        if forced {
            policy.force_action(Some(ep % crate::network_env::DQL_ACTIONS.len()));
        }
        records.push(run_episode(spec, &mut env, ep, &mut policy, &mut rng, true, false)?);
    }
    Ok(TrainingOutcome {
        agent: policy.into_agent(),
        records,
    })
}

/// Offline phase: each episode forces one action for every decision, cycling
/// through the action set, so the replay buffer sees all actions under the
/// same traffic conditions. A fresh agent is created when `agent` is `None`.
pub fn run_offline_training(spec: &ExperimentSpec, agent: Option<DqnAgent>) -> Result<TrainingOutcome> {
    check_phase(spec, Phase::Offline)?;
    let agent = match agent {
        Some(a) => a,
        None => DqnAgent::new(spec.seeded_agent_config())?,
    };
    let policy = DqlTraining::new(agent, EpsilonSchedule::constant(0.0))?;
    run_training(spec, policy, true)
}

/// Online phase: ε-greedy with ε following `spec.agent`'s schedule, by
/// default a linear decay over the phase.
pub fn run_online_training(spec: &ExperimentSpec, agent: DqnAgent) -> Result<TrainingOutcome> {
    check_phase(spec, Phase::Online)?;
    let schedule = spec.agent.epsilon_schedule(spec.episodes);
    let policy = DqlTraining::new(agent, schedule)?;
    run_training(spec, policy, false)
}

/// Offline then online training from a fresh agent; returns the agent and
/// the records of both phases.
pub fn train_agent(offline: &ExperimentSpec, online: &ExperimentSpec) -> Result<TrainingOutcome> {
    let first = run_offline_training(offline, None)?;
    let mut second = run_online_training(online, first.agent)?;
    let mut records = first.records;
    records.append(&mut second.records);
    Ok(TrainingOutcome {
        agent: second.agent,
        records,
    })
}

/// Test phase: the policy is frozen and its parameters must not change.
pub fn run_test(spec: &ExperimentSpec, policy: &mut dyn Policy) -> Result<TestOutcome> {
    check_phase(spec, Phase::Test)?;
    policy.freeze();
    let before = policy.weights_checksum();
    let mut env = NetworkEnv::new(spec.sim.clone())?;
    let mut rng = decision_rng(spec);
    let mut records = Vec::with_capacity(spec.episodes);
    for ep in 0..spec.episodes {
        records.push(run_episode(spec, &mut env, ep, policy, &mut rng, false, true)?);
    }
    if policy.weights_checksum() != before {
        return Err(Error::Invariant(format!(
            "policy {} changed its parameters during the test phase",
            policy.label()
        )));
    }
    let summary = summarize(&records)?;
    Ok(TestOutcome { records, summary })
}
