//! Per-mode operating point of the default cell: QoS-satisfaction fraction,
//! mean delay, mean reward for α = 1 and α = 0.5, and SINR quantiles.
//!
//! `cargo run --release -p pqos-core --example calibrate -- <vehicles> <episodes>`

use pqos_core::harness::quantile;
use pqos_core::network_env::{reset, ApplicationMode, SimConfig};
use pqos_core::reward::{compute_reward, qos_met, RewardParams};

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let n = args.next().unwrap_or(1) as usize;
    let episodes = args.next().unwrap_or(5);
    let cfg = SimConfig {
        n_vehicles: n,
        episode_duration_s: 20.0,
        ..SimConfig::default()
    };
    let (mut env, _) = reset(cfg, 0).expect("valid config");
    println!("peak capacity {:.1} Mbps", env.peak_capacity_mbps());
    let one = RewardParams::default();
    let half = RewardParams { alpha: 0.5, ..one };
    for mode in ApplicationMode::ALL {
        let mut sinrs = Vec::new();
        let (mut met, mut total, mut delay, mut r1, mut r05) = (0, 0, 0.0, 0.0, 0.0);
        for e in 0..episodes {
            env.reset(e);
            while !env.is_done() {
                let out = env.step(&vec![mode; n]).expect("step");
                for (k, q) in out.kpis.iter().zip(&out.qos) {
                    sinrs.push(k.sinr_db);
                    let Some(q) = q else { continue };
                    total += 1;
                    met += usize::from(qos_met(q, &one));
                    delay += k.delay_mean_ms;
                    r1 += compute_reward(q, &one).expect("reward");
                    r05 += compute_reward(q, &half).expect("reward");
                }
            }
        }
        sinrs.sort_by(f64::total_cmp);
        let q = |f| quantile(&sinrs, f).expect("non-empty");
        let t = total as f64;
        println!(
            "mode {:>4}: qos {:.3} mean delay {:.1} ms, reward α=1 {:.3} α=0.5 {:.3}, sinr p10 {:.1} p50 {:.1} p90 {:.1} dB",
            mode.id,
            met as f64 / t,
            delay / t,
            r1 / t,
            r05 / t,
            q(0.1),
            q(0.5),
            q(0.9)
        );
    }
}
