//! Uncertainty-aware group-relative advantage shaping.
//!
//! The crate scores groups of ternary rollouts (Right, Wrong, Uncertain)
//! under three advantage estimators: plain GRPO, GRPO with a fixed
//! intermediate uncertainty reward (GRPO-UC), and UCPO, which normalizes the
//! deterministic rollouts on their own and pays abstention a dynamic
//! fraction of the Right advantage. Around the estimators sit an exhaustive
//! composition analyzer, a seeded policy-gradient simulator that reproduces
//! the training-time failure modes without a language model, and PAQ/F1
//! evaluation metrics.
//!
//! ```
//! use ucpo::{dura, grpo_advantages, ucpo_advantages, RewardScheme, RolloutGroup};
//!
//! let group = RolloutGroup::parse("RWUUUUUU", RewardScheme::canonical_ternary()).unwrap();
//!
//! // a fixed 0.8 reward makes abstention look better than answering here
//! let fixed = grpo_advantages(&group).unwrap();
//! assert!(ucpo::net_right_advantage(&fixed, &group) < 0.0);
//!
//! // the dynamic gain turns negative once abstention dominates the group
//! let gain = dura::gamma(&group.composition(), &dura::DuraParams::default());
//! let decoupled = ucpo_advantages(&group, gain, 1e-6).unwrap();
//! assert!(gain < 0.0);
//! assert!(ucpo::net_right_advantage(&decoupled, &group) > 0.0);
//! ```

pub mod advantage;
pub mod cli;
pub mod config;
pub mod dura;
pub mod error;
pub mod metrics;
pub mod rollout;
pub mod sim;
pub mod sweep;

pub use advantage::{
    grpo_advantages, net_right_advantage, ucpo_advantages, ucpo_advantages_unregularized,
    uncertain_advantage_sign_boundary, AdvantageResult, Method,
};
pub use config::ExperimentConfig;
pub use dura::{DuraParams, GammaRecord};
pub use error::{Error, Result};
pub use metrics::{f1, paq, EvalCounts};
pub use rollout::{compose, is_non_ternary, rewards_of, GroupComposition, Outcome, RewardScheme, RolloutGroup};
pub use sim::{PolicyState, SimConfig, TaskBank, TrajectoryRecord};
pub use sweep::SweepPoint;
