//! PAQ and F1 for a few evaluation profiles, and trailing-window summaries
//! of a simulated run over a mixed-difficulty task bank.
//!
//! cargo run --release --example eval_metrics

use ucpo::metrics::{aggregate, f1, paq, EvalCounts};
use ucpo::sim::{run, Bucket, SimConfig, TaskBank};

fn main() -> ucpo::Result<()> {
    println!("{:>6} {:>6} {:>6} {:>8} {:>8}", "acc", "hal", "unc", "PAQ", "F1");
    for (acc, hal, unc) in [(0.7333, 0.2667, 0.0), (0.6, 0.2, 0.2), (0.3, 0.1, 0.6), (0.0, 0.0, 1.0)] {
        let counts = EvalCounts::new(acc, hal, unc)?;
        let p = paq(&counts).map_or("n/a".into(), |v| format!("{v:.4}"));
        println!("{acc:>6} {hal:>6} {unc:>6} {p:>8} {:>8.4}", f1(&counts));
    }

    let bank = TaskBank {
        buckets: vec![Bucket::new(0.1), Bucket::new(0.5), Bucket::new(0.9)],
        batch_size: 48,
    };
    let traj = run(&SimConfig { steps: 600, ..Default::default() }, &bank)?;
    let summary = aggregate(&traj, 200)?;
    println!("\nlast 200 steps, per bucket:");
    for (k, b) in summary.buckets.iter().enumerate() {
        let Some(m) = b else { continue };
        println!(
            "  p = {:.1}: unc {:.3} acc {:.3} hal {:.3} PAQ {} F1 {:.3}",
            bank.buckets[k].solve_prob,
            m.uncertainty_ratio,
            m.accuracy,
            m.hallucination,
            m.paq.map_or("n/a".into(), |v| format!("{v:.3}")),
            m.f1
        );
    }
    Ok(())
}
