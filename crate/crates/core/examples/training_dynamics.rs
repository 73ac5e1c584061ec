//! Uncertainty ratio over training on a hard task for GRPO, GRPO-UC and UCPO.
//!
//! cargo run --release --example training_dynamics -- [seed] [solve_prob]

use ucpo::dura::DuraParams;
use ucpo::metrics::aggregate;
use ucpo::sim::{equilibrium_oracle, run, SimConfig, TaskBank};
use ucpo::{Method, RewardScheme};

fn main() -> ucpo::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let p: f64 = args.next().map_or(0.1, |s| s.parse().expect("solve_prob"));

    let bank = TaskBank::single(p);
    let runs = [
        ("grpo", Method::Grpo, RewardScheme::standard_binary(), DuraParams::default()),
        ("grpo-uc 0.5", Method::GrpoUc, RewardScheme::ternary(1.0, 0.0, 0.5)?, DuraParams::default()),
        ("grpo-uc 0.8", Method::GrpoUc, RewardScheme::canonical_ternary(), DuraParams::default()),
        ("ucpo (plain)", Method::Ucpo, RewardScheme::canonical_ternary(), DuraParams::default()),
        ("ucpo+lre", Method::Ucpo, RewardScheme::canonical_ternary(), DuraParams::low_resource()),
    ];

    let target = equilibrium_oracle(p, &DuraParams::default())?;
    println!("solve probability {p}, gain root P_u* = {target:.4}");
    println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>10}", "method", "step 100", "step 500", "final", "last-500", "PAQ(last)");
    for (name, method, scheme, dura) in runs {
        let config = SimConfig {
            method,
            scheme,
            dura,
            seed,
            steps: 1000,
            ..Default::default()
        };
        let traj = run(&config, &bank)?;
        let tail = aggregate(&traj, 500)?;
        println!(
            "{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>10}",
            name,
            traj[99].aggregate.uncertainty_ratio,
            traj[499].aggregate.uncertainty_ratio,
            traj.last().unwrap().aggregate.uncertainty_ratio,
            tail.aggregate.uncertainty_ratio,
            tail.aggregate.paq.map_or("n/a".to_string(), |v| format!("{v:.3}")),
        );
    }
    Ok(())
}
