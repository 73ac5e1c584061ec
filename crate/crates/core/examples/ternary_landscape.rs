//! Uncertain-rollout advantage across the composition simplex: where GRPO-UC
//! flips sign and where UCPO's gain does.
//!
//! cargo run --example ternary_landscape -- [group_size] [r_u]

use ucpo::advantage::{uncertain_advantage_sign_boundary, Method};
use ucpo::dura::DuraParams;
use ucpo::sweep::sweep;
use ucpo::RewardScheme;

fn glyph(v: f64) -> char {
    if v > 0.0 {
        '+'
    } else if v < 0.0 {
        '-'
    } else {
        '0'
    }
}

fn main() -> ucpo::Result<()> {
    let mut args = std::env::args().skip(1);
    let g: usize = args.next().map_or(8, |s| s.parse().expect("group size"));
    let r_u: f64 = args.next().map_or(0.8, |s| s.parse().expect("r_u"));
    let scheme = RewardScheme::ternary(1.0, 0.0, r_u)?;
    let points = sweep(g, &scheme, &[Method::GrpoUc, Method::Ucpo], &DuraParams::default())?;
    println!(
        "G = {g}, r_u = {r_u}: GRPO-UC penalises abstention once P_r / P_w > {:.3}",
        uncertain_advantage_sign_boundary(&scheme)?
    );
    println!("rows: n_u (top = all uncertain); columns: n_r; left GRPO-UC, right UCPO");
    for n_u in (1..=g).rev() {
        let mut left = String::new();
        let mut right = String::new();
        for n_r in 0..=(g - n_u) {
            for p in points.iter().filter(|p| p.composition.n_uncertain == n_u && p.composition.n_right == n_r) {
                let cell = if p.filtered { '.' } else { glyph(p.uncertain_advantage) };
                match p.method {
                    Method::GrpoUc => left.push(cell),
                    _ => right.push(cell),
                }
            }
        }
        println!("{n_u:>3} {left:<width$}   {right}", width = g + 1);
    }
    println!("'+' rewards abstention, '-' penalises it, '0' neutral, '.' filtered");
    Ok(())
}
