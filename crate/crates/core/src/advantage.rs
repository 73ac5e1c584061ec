//! Group-relative advantage estimation.
//!
//! Three estimators share one entry point per method:
//!
//! * **GRPO** normalizes binary rewards by the group mean and population
//!   standard deviation.
//! * **GRPO-UC** is the same normalization applied to a ternary scheme that
//!   pays Uncertain an intermediate reward. Abstention then competes against
//!   the group average, which is what makes its sign depend on the group's
//!   accuracy.
//! * **UCPO** splits the group into a deterministic channel (Right and Wrong,
//!   normalized among themselves) and an uncertainty channel whose advantage is
//!   `gamma * A_right`, anchored to the Right advantage of the deterministic
//!   channel.
//!
//! All arithmetic is carried out per outcome class rather than per rollout:
//! rewards are a pure function of the class, so this is exact, permutation
//! equivariant bit-for-bit, and lets deviations that are zero in exact
//! arithmetic come out as exactly `0.0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::{is_non_ternary, GroupComposition, Outcome, RewardScheme, RolloutGroup};

/// Groups whose reward spread falls below this are treated as zero-variance.
pub const ZERO_VARIANCE_GUARD: f64 = 1e-8;

/// Default stabilizer added to the deterministic-channel standard deviation.
pub const DEFAULT_UCPO_EPS: f64 = 1e-6;

/// Deviations within this many ulps of the reward scale are snapped to zero.
const DEVIATION_SNAP_ULPS: f64 = 16.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Grpo,
    GrpoUc,
    Ucpo,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Grpo, Method::GrpoUc, Method::Ucpo];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Grpo => "grpo",
            Method::GrpoUc => "grpo-uc",
            Method::Ucpo => "ucpo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "grpo" => Ok(Method::Grpo),
            "grpo-uc" => Ok(Method::GrpoUc),
            "ucpo" => Ok(Method::Ucpo),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Per-rollout advantages plus the diagnostics of how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageResult {
    pub method: Method,
    pub advantages: Vec<f64>,
    /// Set when the group contributes no gradient: zero variance under
    /// GRPO/GRPO-UC, or a missing deterministic class under UCPO.
    pub filtered: bool,
    pub composition: GroupComposition,
    /// Right advantage in the deterministic channel (UCPO only).
    pub anchor_right: Option<f64>,
    /// Gain applied to the uncertainty channel (UCPO only).
    pub gamma_used: Option<f64>,
    pub det_mean: Option<f64>,
    pub det_std: Option<f64>,
}

impl AdvantageResult {
    fn zeros(method: Method, comp: GroupComposition, len: usize) -> Self {
        AdvantageResult {
            method,
            advantages: vec![0.0; len],
            filtered: true,
            composition: comp,
            anchor_right: None,
            gamma_used: None,
            det_mean: None,
            det_std: None,
        }
    }

    /// Advantage of the first rollout with the given outcome, if any.
    pub fn advantage_of(&self, group: &RolloutGroup, outcome: Outcome) -> Option<f64> {
        group
            .outcomes()
            .iter()
            .position(|&o| o == outcome)
            .map(|i| self.advantages[i])
    }
}

/// Mean and population standard deviation of the rewards of `classes`,
/// weighted by their counts, with per-class deviations from the mean.
struct ClassMoments {
    mean: f64,
    std: f64,
    deviation: [f64; 3],
}

fn class_index(o: Outcome) -> usize {
    match o {
        Outcome::Right => 0,
        Outcome::Wrong => 1,
        Outcome::Uncertain => 2,
    }
}

fn class_moments(comp: &GroupComposition, scheme: &RewardScheme, classes: &[Outcome]) -> ClassMoments {
    let n: usize = classes.iter().map(|&c| comp.count(c)).sum();
    let mut deviation = [0.0; 3];
    if n == 0 {
        return ClassMoments {
            mean: 0.0,
            std: 0.0,
            deviation,
        };
    }
    let n = n as f64;
    let mean = classes
        .iter()
        .map(|&c| comp.count(c) as f64 * scheme.reward(c))
        .sum::<f64>()
        / n;
    let scale = classes
        .iter()
        .map(|&c| scheme.reward(c).abs())
        .fold(mean.abs(), f64::max);
    let snap = DEVIATION_SNAP_ULPS * f64::EPSILON * scale;
    let mut var = 0.0;
    for &c in classes {
        let mut d = scheme.reward(c) - mean;
        if d.abs() <= snap {
            d = 0.0;
        }
        deviation[class_index(c)] = d;
        var += comp.count(c) as f64 * d * d;
    }
    ClassMoments {
        mean,
        std: (var / n).sqrt(),
        deviation,
    }
}

/// Group-relative advantages: `(r_i - mean(r)) / std(r)` with the population
/// standard deviation. Zero-variance groups are filtered to all zeros.
///
/// The method tag is `Grpo` for a binary scheme and `GrpoUc` otherwise.
pub fn grpo_advantages(group: &RolloutGroup) -> Result<AdvantageResult> {
    if group.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "advantages need a group of at least 2 rollouts, got {}",
            group.len()
        )));
    }
    let scheme = group.scheme();
    let method = if scheme.is_binary() {
        Method::Grpo
    } else {
        Method::GrpoUc
    };
    let comp = group.composition();
    let moments = class_moments(&comp, scheme, &Outcome::ALL);
    if moments.std < ZERO_VARIANCE_GUARD {
        return Ok(AdvantageResult::zeros(method, comp, group.len()));
    }
    let per_class = moments.deviation.map(|d| d / moments.std);
    Ok(AdvantageResult {
        method,
        advantages: group
            .outcomes()
            .iter()
            .map(|&o| per_class[class_index(o)])
            .collect(),
        filtered: false,
        composition: comp,
        anchor_right: None,
        gamma_used: None,
        det_mean: None,
        det_std: None,
    })
}

/// Decoupled UCPO advantages with a caller-supplied gain `gamma`.
///
/// Right and Wrong rollouts are normalized within the deterministic subset as
/// `(r_i - mean(r_det)) / (std(r_det) + eps)`; every Uncertain rollout gets
/// `gamma * A_right`. Groups without both a Right and a Wrong rollout are
/// filtered.
pub fn ucpo_advantages(group: &RolloutGroup, gamma: f64, eps: f64) -> Result<AdvantageResult> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Config(format!("UCPO eps must be positive, got {eps}")));
    }
    ucpo_with_eps(group, gamma, eps)
}

/// [`ucpo_advantages`] with no stabilizer on the deterministic standard
/// deviation. Exact channel normalization, used when checking invariants.
pub fn ucpo_advantages_unregularized(group: &RolloutGroup, gamma: f64) -> Result<AdvantageResult> {
    ucpo_with_eps(group, gamma, 0.0)
}

fn ucpo_with_eps(group: &RolloutGroup, gamma: f64, eps: f64) -> Result<AdvantageResult> {
    if !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gain must be finite, got {gamma}")));
    }
    let comp = group.composition();
    if is_non_ternary(&comp) {
        return Ok(AdvantageResult::zeros(Method::Ucpo, comp, group.len()));
    }
    let scheme = group.scheme();
    let moments = class_moments(&comp, scheme, &[Outcome::Right, Outcome::Wrong]);
    let denom = moments.std + eps;
    if denom <= 0.0 {
        return Err(Error::DegenerateScheme(
            "deterministic channel has zero spread; right and wrong rewards coincide".into(),
        ));
    }
    let anchor = moments.deviation[0] / denom;
    let wrong = moments.deviation[1] / denom;
    let unc = gamma * anchor;
    Ok(AdvantageResult {
        method: Method::Ucpo,
        advantages: group
            .outcomes()
            .iter()
            .map(|o| match o {
                Outcome::Right => anchor,
                Outcome::Wrong => wrong,
                Outcome::Uncertain => unc,
            })
            .collect(),
        filtered: false,
        composition: comp,
        anchor_right: Some(anchor),
        gamma_used: Some(gamma),
        det_mean: Some(moments.mean),
        det_std: Some(moments.std),
    })
}

/// Aggregated Right advantage minus aggregated Uncertain advantage.
pub fn net_right_advantage(result: &AdvantageResult, group: &RolloutGroup) -> f64 {
    group
        .outcomes()
        .iter()
        .zip(&result.advantages)
        .map(|(o, a)| match o {
            Outcome::Right => *a,
            Outcome::Uncertain => -*a,
            Outcome::Wrong => 0.0,
        })
        .sum()
}

/// Right-to-Wrong ratio above which GRPO-UC assigns Uncertain rollouts a
/// negative advantage: `(r_u - r_w) / (r_r - r_u)`.
///
/// Uncertain is penalized exactly when the group mean reward exceeds `r_u`,
/// which rearranges to `P_r / P_w > threshold`.
pub fn uncertain_advantage_sign_boundary(scheme: &RewardScheme) -> Result<f64> {
    if scheme.right == scheme.uncertain {
        return Err(Error::DegenerateScheme(
            "right and uncertain rewards coincide; no sign boundary exists".into(),
        ));
    }
    Ok((scheme.uncertain - scheme.wrong) / (scheme.right - scheme.uncertain))
}
