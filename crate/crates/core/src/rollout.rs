//! Ternary rollout data model.
//!
//! A rollout is an abstract, pre-classified verdict on one sampled response:
//! [`Outcome::Right`], [`Outcome::Wrong`] or [`Outcome::Uncertain`]. A
//! [`RolloutGroup`] holds the `G` verdicts for one prompt together with the
//! [`RewardScheme`] that scores them, and [`GroupComposition`] carries the
//! exact class counts that every downstream computation keys on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Verdict of a single rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Right,
    Wrong,
    Uncertain,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Right, Outcome::Wrong, Outcome::Uncertain];

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'R' | 'r' => Some(Outcome::Right),
            'W' | 'w' => Some(Outcome::Wrong),
            'U' | 'u' => Some(Outcome::Uncertain),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Outcome::Right => 'R',
            Outcome::Wrong => 'W',
            Outcome::Uncertain => 'U',
        }
    }

    /// Right and Wrong rollouts form the deterministic subset.
    pub fn is_deterministic(self) -> bool {
        !matches!(self, Outcome::Uncertain)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Scalar rewards for the three verdicts.
///
/// A scheme is *binary* when `uncertain == wrong`: abstaining earns exactly
/// what a wrong answer earns. It is *ternary* when
/// `wrong < uncertain < right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardScheme {
    pub right: f64,
    pub wrong: f64,
    pub uncertain: f64,
}

impl RewardScheme {
    pub fn ternary(right: f64, wrong: f64, uncertain: f64) -> Result<Self> {
        let scheme = RewardScheme {
            right,
            wrong,
            uncertain,
        };
        if !scheme.is_ternary() {
            return Err(Error::Config(format!(
                "ternary scheme requires wrong < uncertain < right, got ({right}, {wrong}, {uncertain})"
            )));
        }
        Ok(scheme)
    }

    pub fn binary(right: f64, wrong: f64) -> Result<Self> {
        if !(right.is_finite() && wrong.is_finite()) || wrong >= right {
            return Err(Error::Config(format!(
                "binary scheme requires wrong < right, got ({right}, {wrong})"
            )));
        }
        Ok(RewardScheme {
            right,
            wrong,
            uncertain: wrong,
        })
    }

    /// The (right, wrong, uncertain) = (1, 0, 0) scheme of plain GRPO.
    pub fn standard_binary() -> Self {
        RewardScheme {
            right: 1.0,
            wrong: 0.0,
            uncertain: 0.0,
        }
    }

    /// The (1, 0, 0.8) scheme used for the ternary-imbalance landscapes.
    pub fn canonical_ternary() -> Self {
        RewardScheme {
            right: 1.0,
            wrong: 0.0,
            uncertain: 0.8,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.uncertain == self.wrong
    }

    pub fn is_ternary(&self) -> bool {
        self.right.is_finite()
            && self.wrong.is_finite()
            && self.uncertain.is_finite()
            && self.wrong < self.uncertain
            && self.uncertain < self.right
    }

    /// Checks that the scheme is either binary or ternary.
    pub fn validate(&self) -> Result<()> {
        let finite = self.right.is_finite() && self.wrong.is_finite() && self.uncertain.is_finite();
        if finite && (self.is_ternary() || (self.is_binary() && self.wrong < self.right)) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "reward scheme must be binary (uncertain == wrong < right) or ternary \
                 (wrong < uncertain < right), got right={} wrong={} uncertain={}",
                self.right, self.wrong, self.uncertain
            )))
        }
    }

    /// Same right/wrong rewards, Uncertain scored as Wrong.
    pub fn to_binary(&self) -> Self {
        RewardScheme {
            uncertain: self.wrong,
            ..*self
        }
    }

    pub fn reward(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Right => self.right,
            Outcome::Wrong => self.wrong,
            Outcome::Uncertain => self.uncertain,
        }
    }
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme::standard_binary()
    }
}

/// Parses `right,wrong,uncertain`, or the shorthands `binary` and `canonical`.
impl FromStr for RewardScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "binary" => return Ok(RewardScheme::standard_binary()),
            "canonical" | "ternary" => return Ok(RewardScheme::canonical_ternary()),
            _ => {}
        }
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "expected `right,wrong,uncertain`, got `{s}`"
            )));
        }
        let mut values = [0.0; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::InvalidInput(format!("not a number: `{part}`")))?;
        }
        let scheme = RewardScheme {
            right: values[0],
            wrong: values[1],
            uncertain: values[2],
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// The `G` verdicts sampled for one prompt and the scheme that scores them.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    outcomes: Vec<Outcome>,
    scheme: RewardScheme,
}

impl RolloutGroup {
    pub fn new(outcomes: Vec<Outcome>, scheme: RewardScheme) -> Result<Self> {
        if outcomes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a rollout group needs at least 2 rollouts, got {}",
                outcomes.len()
            )));
        }
        scheme.validate()?;
        Ok(RolloutGroup { outcomes, scheme })
    }

    /// Builds a group from a string over `{R, W, U}`, e.g. `"RRWU"`.
    pub fn parse(outcomes: &str, scheme: RewardScheme) -> Result<Self> {
        let outcomes = outcomes
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                Outcome::from_char(c)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown outcome `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        RolloutGroup::new(outcomes, scheme)
    }

    /// Canonical group with the given counts, ordered Right, Wrong, Uncertain.
    pub fn from_composition(comp: &GroupComposition, scheme: RewardScheme) -> Result<Self> {
        let mut outcomes = Vec::with_capacity(comp.total());
        outcomes.extend(std::iter::repeat_n(Outcome::Right, comp.n_right));
        outcomes.extend(std::iter::repeat_n(Outcome::Wrong, comp.n_wrong));
        outcomes.extend(std::iter::repeat_n(Outcome::Uncertain, comp.n_uncertain));
        RolloutGroup::new(outcomes, scheme)
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn scheme(&self) -> &RewardScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn composition(&self) -> GroupComposition {
        compose(self)
    }

    pub fn rewards(&self) -> Vec<f64> {
        rewards_of(self)
    }
}

/// Exact class counts of a group. Ratios are derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupComposition {
    pub n_right: usize,
    pub n_wrong: usize,
    pub n_uncertain: usize,
}

impl GroupComposition {
    pub fn new(n_right: usize, n_wrong: usize, n_uncertain: usize) -> Self {
        GroupComposition {
            n_right,
            n_wrong,
            n_uncertain,
        }
    }

    pub fn total(&self) -> usize {
        self.n_right + self.n_wrong + self.n_uncertain
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        match outcome {
            Outcome::Right => self.n_right,
            Outcome::Wrong => self.n_wrong,
            Outcome::Uncertain => self.n_uncertain,
        }
    }

    pub fn n_deterministic(&self) -> usize {
        self.n_right + self.n_wrong
    }

    fn ratio(&self, n: usize) -> f64 {
        let g = self.total();
        if g == 0 {
            0.0
        } else {
            n as f64 / g as f64
        }
    }

    pub fn p_right(&self) -> f64 {
        self.ratio(self.n_right)
    }

    pub fn p_wrong(&self) -> f64 {
        self.ratio(self.n_wrong)
    }

    pub fn p_uncertain(&self) -> f64 {
        self.ratio(self.n_uncertain)
    }

    /// `(P_r, P_w, P_u)`.
    pub fn ratios(&self) -> (f64, f64, f64) {
        (self.p_right(), self.p_wrong(), self.p_uncertain())
    }

    /// Every composition of `g` into three non-negative parts, in ascending
    /// lexicographic order of `(n_right, n_wrong, n_uncertain)`.
    pub fn enumerate(g: usize) -> impl Iterator<Item = GroupComposition> {
        (0..=g).flat_map(move |n_right| {
            (0..=g - n_right).map(move |n_wrong| GroupComposition {
                n_right,
                n_wrong,
                n_uncertain: g - n_right - n_wrong,
            })
        })
    }
}

impl fmt::Display for GroupComposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n_right, self.n_wrong, self.n_uncertain)
    }
}

pub fn compose(group: &RolloutGroup) -> GroupComposition {
    let mut comp = GroupComposition::default();
    for outcome in group.outcomes() {
        match outcome {
            Outcome::Right => comp.n_right += 1,
            Outcome::Wrong => comp.n_wrong += 1,
            Outcome::Uncertain => comp.n_uncertain += 1,
        }
    }
    comp
}

impl Default for GroupComposition {
    fn default() -> Self {
        GroupComposition::new(0, 0, 0)
    }
}

/// True when the deterministic subset lacks a Right or a Wrong rollout.
/// Such groups carry no correctness contrast and are dropped from UCPO updates.
pub fn is_non_ternary(comp: &GroupComposition) -> bool {
    comp.n_right == 0 || comp.n_wrong == 0
}

pub fn rewards_of(group: &RolloutGroup) -> Vec<f64> {
    group
        .outcomes()
        .iter()
        .map(|&o| group.scheme().reward(o))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn group(s: &str, scheme: RewardScheme) -> RolloutGroup {
        RolloutGroup::parse(s, scheme).unwrap()
    }

    #[test]
    fn compose_counts_classes() {
        let c = compose(&group("RRWW", RewardScheme::standard_binary()));
        assert_eq!(c, GroupComposition::new(2, 2, 0));
        assert_eq!(c.ratios(), (0.5, 0.5, 0.0));

        let c = compose(&group("UUUU", RewardScheme::canonical_ternary()));
        assert_eq!(c, GroupComposition::new(0, 0, 4));
        assert_eq!(c.p_uncertain(), 1.0);

        let c = compose(&group("RWUUUUUU", RewardScheme::canonical_ternary()));
        assert_eq!(c, GroupComposition::new(1, 1, 6));
        assert_eq!(c.ratios(), (0.125, 0.125, 0.75));
    }

    #[test]
    fn non_ternary_filter() {
        assert!(!is_non_ternary(&GroupComposition::new(3, 3, 2)));
        assert!(is_non_ternary(&GroupComposition::new(0, 5, 3)));
        assert!(is_non_ternary(&GroupComposition::new(4, 0, 4)));
        // no uncertainty channel, but both deterministic classes present
        assert!(!is_non_ternary(&GroupComposition::new(4, 4, 0)));
    }

    #[test]
    fn rewards_follow_scheme() {
        let t = RewardScheme::canonical_ternary();
        assert_eq!(rewards_of(&group("RW", t)), vec![1.0, 0.0]);
        assert_eq!(rewards_of(&group("UU", t)), vec![0.8, 0.8]);
        assert_eq!(
            rewards_of(&group("RUW", RewardScheme::standard_binary())),
            vec![1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn group_rejects_short_and_bad_input() {
        assert!(RolloutGroup::parse("R", RewardScheme::standard_binary()).is_err());
        assert!(RolloutGroup::parse("RX", RewardScheme::standard_binary()).is_err());
        let bad = RewardScheme {
            right: 0.0,
            wrong: 1.0,
            uncertain: 0.5,
        };
        assert!(RolloutGroup::parse("RW", bad).is_err());
    }

    #[test]
    fn scheme_constructors_and_parsing() {
        assert!(RewardScheme::ternary(1.0, 0.0, 0.8).is_ok());
        assert!(RewardScheme::ternary(1.0, 0.0, 1.0).is_err());
        assert!(RewardScheme::binary(1.0, 0.0).unwrap().is_binary());
        assert_eq!(
            "1,0,0.8".parse::<RewardScheme>().unwrap(),
            RewardScheme::canonical_ternary()
        );
        assert_eq!(
            "binary".parse::<RewardScheme>().unwrap(),
            RewardScheme::standard_binary()
        );
        assert!("1,0".parse::<RewardScheme>().is_err());
        assert!("0,1,0.5".parse::<RewardScheme>().is_err());
    }

    #[test]
    fn enumeration_is_complete_and_ordered() {
        let all: Vec<_> = GroupComposition::enumerate(8).collect();
        assert_eq!(all.len(), 45);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|c| c.total() == 8));
    }

    fn outcomes_strategy() -> impl Strategy<Value = Vec<Outcome>> {
        prop::collection::vec(prop::sample::select(Outcome::ALL.to_vec()), 2..40)
    }

    proptest! {
        #[test]
        fn mean_reward_matches_composition(
            outcomes in outcomes_strategy(),
            u in 0.01f64..0.99,
        ) {
            let scheme = RewardScheme::ternary(1.0, 0.0, u).unwrap();
            let g = RolloutGroup::new(outcomes, scheme).unwrap();
            let c = compose(&g);
            let r = rewards_of(&g);
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            let (pr, pw, pu) = c.ratios();
            let expected = pr * scheme.right + pw * scheme.wrong + pu * scheme.uncertain;
            prop_assert!((mean - expected).abs() <= 1e-12);
            prop_assert_eq!(c.total(), g.len());
            prop_assert!((pr + pw + pu - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn filter_is_permutation_invariant(
            mut outcomes in outcomes_strategy(),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let scheme = RewardScheme::canonical_ternary();
            let before = is_non_ternary(&compose(&RolloutGroup::new(outcomes.clone(), scheme).unwrap()));
            outcomes.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let after = is_non_ternary(&compose(&RolloutGroup::new(outcomes, scheme).unwrap()));
            prop_assert_eq!(before, after);
        }
    }
}
