use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pqos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqos"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pqos(args);
    assert!(
        out.status.success(),
        "pqos {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_test_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["train-offline", "--episodes", "3", "--seed", "4", "--out", s(out)]);
    let offline = out.join("offline.ckpt");
    assert!(offline.exists());
    ok(&["train-online", "--checkpoint", s(&offline), "--episodes", "3", "--seed", "4", "--out", s(out)]);
    let online = out.join("online.ckpt");
    let probs = fs::read_to_string(out.join("online_action_probability.csv")).unwrap();
    assert_eq!(probs.lines().count(), 4);

    let test_dir = out.join("test");
    let stdout = ok(&[
        "test", "--policy", "dql", "--checkpoint", s(&online), "--episodes", "2", "--out", s(&test_dir),
    ]);
    assert!(stdout.starts_with("dql:"));
    for f in ["steps.csv", "episodes.csv", "summary.csv", "delay_boxplot.csv", "reward_distribution.csv"] {
        assert!(test_dir.join(f).exists(), "{f}");
    }
    let boxplot = fs::read_to_string(test_dir.join("delay_boxplot.csv")).unwrap();
    assert_eq!(boxplot.lines().count(), 2);

    let export_dir = out.join("export");
    ok(&["export", s(&test_dir.join("steps.csv")), "--out", s(&export_dir)]);
    for f in ["action_probability.csv", "cd_distribution.csv", "qos_distribution.csv", "delay_boxplot.csv"] {
        assert_eq!(
            fs::read(test_dir.join(f)).unwrap(),
            fs::read(export_dir.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn constant_policy_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "sim.n_vehicles = 2\nreward.alpha = 0.5\nexperiment.test_episodes = 1\nexperiment.seed = 3\n").unwrap();
    let out = dir.path().join("o");
    ok(&["test", "--config", s(&cfg), "--policy", "constant:1450", "--out", s(&out)]);
    let cd = fs::read_to_string(out.join("cd_distribution.csv")).unwrap();
    assert_eq!(cd.lines().nth(1).unwrap(), "constant:1450,0.000044,400,1.0");
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["test", "--policy", "constant:1451", "--vehicles", "2", "--episodes", "2", "--seed", "9", "--out", s(&out)]);
        fs::read(out.join("steps.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn validate_metric_prints_distance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.xyz");
    let b = dir.path().join("b.xyz");
    fs::write(&a, "0 0 0\n1 0 0\n").unwrap();
    fs::write(&b, "0 0 2\n").unwrap();
    // a→b: 4 + 5; b→a: 4
    for method in ["kdtree", "naive"] {
        let out = ok(&["validate-metric", s(&a), s(&b), "--method", method]);
        assert_eq!(out.trim(), "13");
    }
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let cases: &[&[&str]] = &[
        &["test", "--policy", "dql"],
        &["test", "--policy", "constant:7"],
        &["train-offline", "--profile", "fast"],
        &["train-offline", "--vehicles", "0"],
        &["train-online", "--checkpoint", "/nonexistent/agent.ckpt"],
        &["validate-metric", "/nonexistent/a.xyz", "/nonexistent/b.xyz"],
        &["export", "/nonexistent/steps.csv"],
    ];
    let dir = tempfile::tempdir().unwrap();
    for args in cases {
        let mut full: Vec<&str> = args.to_vec();
        let out_dir = dir.path().join("unused");
        if !matches!(args[0], "validate-metric" | "export") {
            full.extend(["--out", s(&out_dir)]);
        }
        let out = pqos(&full);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["quick.toml", "paper.toml"] {
        let cfg = configs.join(name);
        let out = dir.path().join(name);
        ok(&["test", "--config", s(&cfg), "--policy", "constant:1452", "--episodes", "1", "--out", s(&out)]);
    }
}
