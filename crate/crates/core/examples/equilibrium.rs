//! Equilibrium abstention rate P_u* as a function of task difficulty,
//! next to the long-run ratio the simulator settles at.
//!
//! cargo run --release --example equilibrium -- [seed]

use ucpo::dura::DuraParams;
use ucpo::metrics::aggregate;
use ucpo::sim::{equilibrium_oracle, run, SimConfig, TaskBank};

fn main() -> ucpo::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    println!("{:>6} {:>8} {:>10} {:>10}", "p", "P_u*", "sim tail", "gap");
    for p in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9] {
        let target = equilibrium_oracle(p, &DuraParams::default())?;
        let config = SimConfig { seed, steps: 1000, ..Default::default() };
        let traj = run(&config, &TaskBank::single(p))?;
        let tail = aggregate(&traj, 500)?.aggregate.uncertainty_ratio;
        println!("{p:>6.2} {target:>8.4} {tail:>10.4} {:>+10.4}", tail - target);
    }
    Ok(())
}
