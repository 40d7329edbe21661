//! `pqos`: train, test and export application-mode selection experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pqos_core::config::ConfigFile;
use pqos_core::dqn_agent::{Checkpoint, DqnAgent};
use pqos_core::harness::{
    emit_figures_csv, read_steps_csv, run_offline_training, run_online_training, run_test,
    write_action_probability_csv, write_episodes_csv, write_steps_csv, write_summary_csv,
    ExperimentSpec, Phase, Profile, TrainingOutcome,
};
use pqos_core::policies::{dql_action_ids, PolicyArgs, PolicyRegistry};
use pqos_core::qoe_metrics::{chamfer_method, PointCloud};

#[derive(Debug, Parser)]
#[command(name = "pqos", version, about = "Application-mode selection for LiDAR streaming over a simulated cell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Offline phase: one fixed action per episode, cycling through the action set.
    TrainOffline(TrainArgs),
    /// Online phase: ε-greedy decisions with a decaying ε.
    TrainOnline(TrainArgs),
    /// Test phase: a frozen DQL agent or a constant policy.
    Test(TestArgs),
    /// Symmetric Chamfer distance between two point-cloud files.
    ValidateMetric(MetricArgs),
    /// Rebuild the figure CSVs from a saved steps.csv.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reward weight of the QoE term.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    vehicles: Option<usize>,
    /// Episode count, overriding the profile and config.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// quick (200-step episodes) or paper (800-step episodes).
    #[arg(long)]
    profile: Option<Profile>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint to continue from; a fresh agent is created without one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `dql` (needs --checkpoint) or `constant:<0|1450|1451|1452>`.
    #[arg(long, default_value = "dql")]
    policy: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricArgs {
    /// Reference cloud: one `x y z` point per line.
    reference: PathBuf,
    candidate: PathBuf,
    /// Nearest-neighbour search: kdtree or naive.
    #[arg(long, default_value = "kdtree")]
    method: String,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// A steps.csv written by `pqos test`.
    steps: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

struct Setup {
    spec: ExperimentSpec,
    out: PathBuf,
}

fn setup(common: &CommonArgs, phase: Phase) -> Result<Setup> {
    let mut cfg = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(alpha) = common.alpha {
        cfg.reward.alpha = alpha;
    }
    if let Some(n) = common.vehicles {
        cfg.sim.n_vehicles = n;
    }
    cfg.validate()?;
    let profile = common.profile.or(cfg.experiment.profile).unwrap_or(Profile::Quick);
    let seed = common.seed.or(cfg.experiment.seed).unwrap_or(0);
    let mut spec = ExperimentSpec::from_config(&cfg, profile, phase, seed);
    if let Some(n) = common.episodes {
        spec.episodes = n;
    }
    spec.validate()?;
    fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create output directory {}", common.out.display()))?;
    Ok(Setup {
        spec,
        out: common.out.clone(),
    })
}

fn load_agent(spec: &ExperimentSpec, checkpoint: Option<&Path>) -> Result<Option<DqnAgent>> {
    let Some(path) = checkpoint else {
        return Ok(None);
    };
    let ckpt = Checkpoint::load(path)?;
    if ckpt.action_ids != dql_action_ids() {
        bail!(
            "{}: checkpoint maps actions to modes {:?}, expected {:?}",
            path.display(),
            ckpt.action_ids,
            dql_action_ids()
        );
    }
    Ok(Some(DqnAgent::from_checkpoint(spec.seeded_agent_config(), &ckpt)?))
}

fn save_training(out: &Path, name: &str, result: &TrainingOutcome) -> Result<()> {
    let ckpt = out.join(format!("{name}.ckpt"));
    result.agent.to_checkpoint(&dql_action_ids()).save(&ckpt)?;
    write_episodes_csv(&result.records, out.join(format!("{name}_episodes.csv")))?;
    write_action_probability_csv(&result.records, out.join(format!("{name}_action_probability.csv")))?;
    let last = result.records.last().expect("at least one episode");
    println!(
        "{name}: {} episodes, {} updates, last episode mean reward {:.4}, QoS {:.3}; checkpoint {}",
        result.records.len(),
        result.agent.train_steps(),
        last.mean_reward,
        last.qos_fraction,
        ckpt.display()
    );
    Ok(())
}

fn train_offline(args: &TrainArgs) -> Result<()> {
    let Setup { spec, out } = setup(&args.common, Phase::Offline)?;
    let agent = load_agent(&spec, args.checkpoint.as_deref())?;
    let result = run_offline_training(&spec, agent)?;
    save_training(&out, "offline", &result)
}

fn train_online(args: &TrainArgs) -> Result<()> {
    let Setup { spec, out } = setup(&args.common, Phase::Online)?;
    let agent = match load_agent(&spec, args.checkpoint.as_deref())? {
        Some(a) => a,
        None => DqnAgent::new(spec.seeded_agent_config())?,
    };
    let result = run_online_training(&spec, agent)?;
    save_training(&out, "online", &result)
}

fn test(args: &TestArgs) -> Result<()> {
    let Setup { spec, out } = setup(&args.common, Phase::Test)?;
    let policy_args = PolicyArgs {
        checkpoint: args.checkpoint.clone(),
        agent: spec.agent.clone(),
        online_episodes: 0,
    };
    let mut policy = PolicyRegistry::with_builtins().create(&args.policy, &policy_args)?;
    let result = run_test(&spec, policy.as_mut())?;
    write_steps_csv(&result.records, out.join("steps.csv"))?;
    write_episodes_csv(&result.records, out.join("episodes.csv"))?;
    write_summary_csv(std::slice::from_ref(&result.summary), out.join("summary.csv"))?;
    emit_figures_csv(&result.records, &out)?;
    let s = &result.summary;
    println!(
        "{}: {} episodes, QoS {:.3}, median normalized reward {:.4}, median delay {:.2} ms; results in {}",
        s.policy,
        s.episodes,
        s.qos_fraction,
        s.reward.median,
        s.delay.median,
        out.display()
    );
    Ok(())
}

fn validate_metric(args: &MetricArgs) -> Result<()> {
    let method = chamfer_method(&args.method)?;
    let a = PointCloud::load(&args.reference)?;
    let b = PointCloud::load(&args.candidate)?;
    println!("{}", method.distance(&a, &b)?);
    Ok(())
}

fn export(args: &ExportArgs) -> Result<()> {
    let records = read_steps_csv(&args.steps)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    for path in emit_figures_csv(&records, &args.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TrainOffline(a) => train_offline(a),
        Command::TrainOnline(a) => train_online(a),
        Command::Test(a) => test(a),
        Command::ValidateMetric(a) => validate_metric(a),
        Command::Export(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pqos: {e:#}");
            ExitCode::FAILURE
        }
    }
}
