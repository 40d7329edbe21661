use pqos_core::dqn_agent::DqnAgent;
use pqos_core::harness::{
    emit_figures_csv, run_offline_training, run_online_training, run_test, ExperimentSpec, Phase,
    Profile,
};
use pqos_core::network_env::{ApplicationMode, StateVector};
use pqos_core::policies::{ConstantPolicy, Policy};
use pqos_core::Error;

fn short(phase: Phase, n_vehicles: usize, episodes: usize, seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Profile::Quick, phase, n_vehicles, 1.0, seed);
    spec.episodes = episodes;
    spec
}

#[test]
fn pinned_full_exploration_is_uniform() {
    let mut spec = short(Phase::Online, 5, 3, 2);
    spec.agent.eps_start = 1.0;
    spec.agent.eps_end = 1.0;
    let agent = DqnAgent::new(spec.seeded_agent_config()).unwrap();
    let out = run_online_training(&spec, agent).unwrap();
    for rec in &out.records {
        let n = rec.decisions() as f64;
        assert_eq!(n, 1000.0);
        let sigma = (1.0 / 3.0 * 2.0 / 3.0 / n).sqrt();
        for id in [1450, 1451, 1452] {
            let p = rec.action_fraction(id);
            assert!((p - 1.0 / 3.0).abs() < 3.0 * sigma, "mode {id}: {p}");
        }
    }
}

#[test]
fn pinned_greedy_run_repeats_its_actions() {
    let offline = short(Phase::Offline, 2, 3, 8);
    let agent = run_offline_training(&offline, None).unwrap().agent;
    let mut spec = short(Phase::Online, 2, 2, 8);
    spec.agent.eps_start = 0.0;
    spec.agent.eps_end = 0.0;
    let a = run_online_training(&spec, agent.clone()).unwrap();
    let b = run_online_training(&spec, agent).unwrap();
    let counts = |o: &pqos_core::harness::TrainingOutcome| {
        o.records.iter().map(|r| r.action_counts.clone()).collect::<Vec<_>>()
    };
    assert_eq!(counts(&a), counts(&b));
    assert!(a.records.iter().all(|r| r.epsilon == 0.0));
}

#[test]
fn every_training_step_yields_one_transition_per_vehicle() {
    let out = run_offline_training(&short(Phase::Offline, 3, 3, 1), None).unwrap();
    assert!(out.records.iter().all(|r| r.transitions == 200 * 3));
}

#[test]
fn constant_test_runs() {
    let spec = short(Phase::Test, 1, 2, 4);
    let out = run_test(&spec, &mut ConstantPolicy::new(1450).unwrap()).unwrap();
    let rows: Vec<_> = out.records.iter().flat_map(|r| &r.rows).collect();
    assert_eq!(rows.len(), 400);
    assert!(rows.iter().all(|r| r.cd == 0.000044));
    let s = &out.summary;
    for v in [s.reward.min, s.reward.median, s.reward.max] {
        assert!((-1.0..=1.0).contains(&v));
    }
    assert_eq!(s.action_share.get(&1450), Some(&1.0));
}

#[test]
fn one_episode_boxplot_has_a_row_per_policy() {
    let spec = short(Phase::Test, 1, 1, 4);
    let mut records = run_test(&spec, &mut ConstantPolicy::new(1451).unwrap()).unwrap().records;
    records.extend(run_test(&spec, &mut ConstantPolicy::new(0).unwrap()).unwrap().records);
    let dir = tempfile::tempdir().unwrap();
    emit_figures_csv(&records, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("delay_boxplot.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("constant:1451,200,"));
    assert!(lines[2].starts_with("constant:0,200,"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let spec = short(Phase::Test, 1, 1, 4);
    let records = run_test(&spec, &mut ConstantPolicy::new(1451).unwrap()).unwrap().records;
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    assert!(matches!(emit_figures_csv(&records, blocker.join("sub")), Err(Error::Io { .. })));
}

/// A policy that changes its own parameters while deciding.
struct Drifting(u64);

impl Policy for Drifting {
    fn label(&self) -> String {
        "drifting".into()
    }

    fn decide(&mut self, _: &StateVector, _: &mut dyn rand::RngCore) -> pqos_core::Result<ApplicationMode> {
        self.0 += 1;
        Ok(ApplicationMode::NO_ROAD)
    }

    fn weights_checksum(&self) -> Option<u64> {
        Some(self.0)
    }
}

#[test]
fn parameter_drift_during_test_is_an_invariant_violation() {
    let spec = short(Phase::Test, 1, 1, 4);
    assert!(matches!(run_test(&spec, &mut Drifting(0)), Err(Error::Invariant(_))));
}
