//! Per-rollout advantages of GRPO, GRPO-UC and UCPO on the same groups.
//!
//! cargo run --example advantage_methods -- [OUTCOMES...]
//!
//! Each argument is a group written as a string of `R`, `W` and `U`.

use ucpo::advantage::{grpo_advantages, net_right_advantage, ucpo_advantages, DEFAULT_UCPO_EPS};
use ucpo::dura::{self, DuraParams};
use ucpo::{RewardScheme, RolloutGroup};

fn show(label: &str, advantages: &[f64], net: f64, filtered: bool) {
    let cells: Vec<String> = advantages.iter().map(|a| format!("{a:+.3}")).collect();
    let flag = if filtered { " (filtered)" } else { "" };
    println!("  {label:<8} [{}] net right {net:+.3}{flag}", cells.join(" "));
}

fn main() -> ucpo::Result<()> {
    let mut groups: Vec<String> = std::env::args().skip(1).collect();
    if groups.is_empty() {
        groups = ["RRWW", "RWUUUUUU", "RRRRRRWU", "RRRRWUUU", "UUUUUUUU"]
            .map(String::from)
            .to_vec();
    }
    let params = DuraParams::default();
    for text in &groups {
        println!("{text}");
        let binary = RolloutGroup::parse(text, RewardScheme::standard_binary())?;
        let r = grpo_advantages(&binary)?;
        show("grpo", &r.advantages, net_right_advantage(&r, &binary), r.filtered);

        let ternary = RolloutGroup::parse(text, RewardScheme::canonical_ternary())?;
        let r = grpo_advantages(&ternary)?;
        show("grpo-uc", &r.advantages, net_right_advantage(&r, &ternary), r.filtered);

        let gain = dura::gamma(&ternary.composition(), &params);
        let r = ucpo_advantages(&ternary, gain, DEFAULT_UCPO_EPS)?;
        show("ucpo", &r.advantages, net_right_advantage(&r, &ternary), r.filtered);
        println!("  gain {gain:+.4}");
    }
    Ok(())
}
