//! Gain of every filtered-in composition, with the multiplicity-weighted
//! histogram, and how fusion and `tanh` reshape it.
//!
//! cargo run --example gamma_distribution -- [group_size]

use ucpo::dura::{self, enumerate_gamma_distribution, DuraParams};

fn main() -> ucpo::Result<()> {
    let g: usize = std::env::args().nth(1).map_or(8, |s| s.parse().expect("group size"));
    let params = DuraParams::default();
    let records = enumerate_gamma_distribution(g, &params);
    let gains: Vec<f64> = records.iter().map(|r| r.gamma_sample).collect();
    let lo = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("G = {g}: {} compositions, gain in [{lo:.6}, {hi:.6}]", records.len());

    let bins = 10;
    let width = (hi - lo) / bins as f64;
    let mut uniform = vec![0usize; bins];
    let mut weighted = vec![0.0f64; bins];
    for r in &records {
        let b = (((r.gamma_sample - lo) / width) as usize).min(bins - 1);
        uniform[b] += 1;
        weighted[b] += r.multiplicity;
    }
    let total: f64 = weighted.iter().sum();
    println!("{:>20} {:>8} {:>10}", "bin", "count", "weighted");
    for b in 0..bins {
        let from = lo + b as f64 * width;
        println!(
            "[{from:+.3}, {:+.3}) {:>8} {:>9.3}%",
            from + width,
            uniform[b],
            100.0 * weighted[b] / total
        );
    }

    // reshaping through batch fusion and tanh, with the batch mean taken
    // over the same enumeration
    let lre = DuraParams::low_resource();
    let mean = dura::batch_mean(&gains);
    let reshaped: Vec<f64> = records
        .iter()
        .map(|r| dura::gamma_pipeline(&r.composition, mean, &lre).gamma_final)
        .collect();
    let rlo = reshaped.iter().copied().fold(f64::INFINITY, f64::min);
    let rhi = reshaped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("with fusion (batch mean {mean:+.4}) and tanh: [{rlo:.4}, {rhi:.4}]");

    dura::write_gamma_csv(&records, std::io::stdout().lock())
}
