//! Seeded policy-gradient simulator over ternary outcomes.
//!
//! Each prompt belongs to a difficulty bucket with a solve probability `p`.
//! The policy has one free parameter per bucket, the abstain logit
//! `theta_u`: a rollout abstains (Uncertain) with probability
//! `sigmoid(theta_u)`, otherwise it attempts and is Right with probability
//! `p`. Groups are scored by the configured advantage method and the logits
//! are moved by gradient ascent on the clipped surrogate, with one action
//! (abstain or attempt) per rollout.
//!
//! Right and Wrong rollouts both credit the attempt action. Whether an
//! attempt succeeds is environment randomness from the policy's point of
//! view; optional capability growth is the only way `p` changes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::advantage::{grpo_advantages, ucpo_advantages, AdvantageResult, Method};
use crate::dura::{self, DuraParams};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalCounts};
use crate::rollout::{is_non_ternary, Outcome, RewardScheme, RolloutGroup};

/// One difficulty bucket of the task bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bucket {
    pub solve_prob: f64,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    /// Ceiling for capability growth; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_solve_prob: Option<f64>,
}

fn unit_weight() -> f64 {
    1.0
}

impl Bucket {
    pub fn new(solve_prob: f64) -> Self {
        Bucket {
            solve_prob,
            weight: 1.0,
            max_solve_prob: None,
        }
    }

    pub fn ceiling(&self) -> f64 {
        self.max_solve_prob.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBank {
    pub buckets: Vec<Bucket>,
    /// Prompts sampled per step.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_batch() -> usize {
    32
}

impl TaskBank {
    /// A single bucket with solve probability `p` and the default batch size.
    pub fn single(p: f64) -> Self {
        TaskBank {
            buckets: vec![Bucket::new(p)],
            batch_size: default_batch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets.is_empty() {
            return Err(Error::Config("task bank has no buckets".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let mut total = 0.0;
        for (k, b) in self.buckets.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.solve_prob) {
                return Err(Error::Config(format!(
                    "bucket {k}: solve_prob must lie in [0, 1], got {}",
                    b.solve_prob
                )));
            }
            if !(b.weight.is_finite() && b.weight >= 0.0) {
                return Err(Error::Config(format!("bucket {k}: weight must be >= 0")));
            }
            if let Some(cap) = b.max_solve_prob {
                if !(b.solve_prob..=1.0).contains(&cap) {
                    return Err(Error::Config(format!(
                        "bucket {k}: max_solve_prob must lie in [solve_prob, 1], got {cap}"
                    )));
                }
            }
            total += b.weight;
        }
        if total <= 0.0 {
            return Err(Error::Config("bucket weights must sum to > 0".into()));
        }
        Ok(())
    }
}

impl Default for TaskBank {
    fn default() -> Self {
        TaskBank::single(0.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub method: Method,
    pub scheme: RewardScheme,
    pub group_size: usize,
    /// Gain parameters. Defaults to [`DuraParams::low_resource`] since the
    /// default group of 8 is small enough for per-group gains to be noisy;
    /// a partially written `[sim.dura]` table falls back to the plain
    /// [`DuraParams`] defaults for the keys it omits.
    pub dura: DuraParams,
    pub lr: f64,
    pub clip_eps: f64,
    pub kl_beta: f64,
    /// Surrogate epochs per batch. With one epoch the importance ratio is 1
    /// and clipping never binds.
    pub epochs: usize,
    pub steps: usize,
    pub seed: u64,
    pub init_abstain_prob: f64,
    /// Capability growth rate; `None` keeps solve probabilities fixed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capability_growth: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            method: Method::Ucpo,
            scheme: RewardScheme::canonical_ternary(),
            group_size: 8,
            dura: DuraParams::low_resource(),
            lr: 0.5,
            clip_eps: 0.2,
            kl_beta: 0.0,
            epochs: 1,
            steps: 1000,
            seed: 0,
            init_abstain_prob: 0.05,
            capability_growth: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config("group_size must be >= 2".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.init_abstain_prob > 0.0 && self.init_abstain_prob < 1.0) {
            return Err(Error::Config(format!(
                "init_abstain_prob must lie in (0, 1), got {}",
                self.init_abstain_prob
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.clip_eps.is_finite() && self.clip_eps >= 0.0) {
            return Err(Error::Config("clip_eps must be >= 0".into()));
        }
        if !(self.kl_beta.is_finite() && self.kl_beta >= 0.0) {
            return Err(Error::Config("kl_beta must be >= 0".into()));
        }
        if let Some(rate) = self.capability_growth {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::Config("capability_growth must be >= 0".into()));
            }
        }
        self.scheme.validate()?;
        if self.method == Method::GrpoUc && !self.scheme.is_ternary() {
            return Err(Error::Config("GRPO-UC needs a ternary reward scheme".into()));
        }
        self.dura.validate()
    }

    /// Reward scheme the method actually scores with.
    pub fn effective_scheme(&self) -> RewardScheme {
        match self.method {
            Method::Grpo => self.scheme.to_binary(),
            _ => self.scheme,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Abstain,
    Attempt,
}

impl Action {
    pub fn of(outcome: Outcome) -> Self {
        if outcome == Outcome::Uncertain {
            Action::Abstain
        } else {
            Action::Attempt
        }
    }
}

/// `log pi(action)` for an abstain logit `theta`.
pub fn log_prob(action: Action, theta: f64) -> f64 {
    // log sigmoid(x) = -softplus(-x)
    let softplus = |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p();
    match action {
        Action::Abstain => -softplus(-theta),
        Action::Attempt => -softplus(theta),
    }
}

/// `d log pi(action) / d theta`.
pub fn log_prob_grad(action: Action, theta: f64) -> f64 {
    match action {
        Action::Abstain => 1.0 - sigmoid(theta),
        Action::Attempt => -sigmoid(theta),
    }
}

/// `KL(Bernoulli(sigmoid(theta)) || Bernoulli(sigmoid(theta_ref)))`.
pub fn kl_divergence(theta: f64, theta_ref: f64) -> f64 {
    let p = sigmoid(theta);
    p * (log_prob(Action::Abstain, theta) - log_prob(Action::Abstain, theta_ref))
        + (1.0 - p) * (log_prob(Action::Attempt, theta) - log_prob(Action::Attempt, theta_ref))
}

pub fn kl_divergence_grad(theta: f64, theta_ref: f64) -> f64 {
    let p = sigmoid(theta);
    p * (1.0 - p) * (theta - theta_ref)
}

/// Terms of the clipped surrogate for one bucket.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateTerms<'a> {
    /// `(action, advantage)` for every rollout of the bucket in the batch.
    pub samples: &'a [(Action, f64)],
    /// Total rollouts in the batch, across all buckets.
    pub batch_rollouts: usize,
    pub theta_old: f64,
    pub theta_ref: f64,
    pub clip_eps: f64,
    pub kl_beta: f64,
}

impl SurrogateTerms<'_> {
    /// Batch-averaged clipped surrogate minus the KL penalty, as a function
    /// of the bucket's logit.
    pub fn objective(&self, theta: f64) -> f64 {
        let n = self.batch_rollouts as f64;
        let mut total = 0.0;
        for &(a, adv) in self.samples {
            let ratio = (log_prob(a, theta) - log_prob(a, self.theta_old)).exp();
            let clipped = ratio.clamp(1.0 - self.clip_eps, 1.0 + self.clip_eps);
            total += (ratio * adv).min(clipped * adv);
            total -= self.kl_beta * kl_divergence(theta, self.theta_ref);
        }
        total / n
    }

    pub fn gradient(&self, theta: f64) -> f64 {
        let n = self.batch_rollouts as f64;
        let mut total = 0.0;
        for &(a, adv) in self.samples {
            let ratio = (log_prob(a, theta) - log_prob(a, self.theta_old)).exp();
            let clipped = (adv > 0.0 && ratio > 1.0 + self.clip_eps)
                || (adv < 0.0 && ratio < 1.0 - self.clip_eps);
            if !clipped {
                total += adv * ratio * log_prob_grad(a, theta);
            }
            total -= self.kl_beta * kl_divergence_grad(theta, self.theta_ref);
        }
        total / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub abstain_logit: Vec<f64>,
    /// Effective solve probability per bucket.
    pub solve_prob: Vec<f64>,
    /// Reference logits for the KL penalty (the initial policy).
    pub reference_logit: Vec<f64>,
    pub step: usize,
}

impl PolicyState {
    pub fn new(bank: &TaskBank, init_abstain_prob: f64) -> Self {
        let theta = logit(init_abstain_prob);
        let k = bank.buckets.len();
        PolicyState {
            abstain_logit: vec![theta; k],
            solve_prob: bank.buckets.iter().map(|b| b.solve_prob).collect(),
            reference_logit: vec![theta; k],
            step: 0,
        }
    }

    pub fn abstain_prob(&self, bucket: usize) -> f64 {
        sigmoid(self.abstain_logit[bucket])
    }
}

/// A scored group tagged with the bucket it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGroup {
    pub bucket: usize,
    pub group: RolloutGroup,
    pub result: AdvantageResult,
}

/// Draws `g` independent rollouts: Uncertain with probability
/// `sigmoid(theta_u)`, otherwise Right with probability `p_eff`.
pub fn sample_group<R: Rng + ?Sized>(
    bucket: usize,
    policy: &PolicyState,
    g: usize,
    scheme: RewardScheme,
    rng: &mut R,
) -> Result<RolloutGroup> {
    let abstain = policy.abstain_prob(bucket);
    let solve = policy.solve_prob[bucket];
    let outcomes = (0..g)
        .map(|_| {
            if rng.random::<f64>() < abstain {
                Outcome::Uncertain
            } else if rng.random::<f64>() < solve {
                Outcome::Right
            } else {
                Outcome::Wrong
            }
        })
        .collect();
    RolloutGroup::new(outcomes, scheme)
}

fn rollouts_in(batch: &[ScoredGroup]) -> usize {
    batch.iter().map(|s| s.group.len()).sum()
}

fn bucket_samples(batch: &[ScoredGroup], bucket: usize) -> Vec<(Action, f64)> {
    batch
        .iter()
        .filter(|s| s.bucket == bucket)
        .flat_map(|s| {
            s.group
                .outcomes()
                .iter()
                .zip(&s.result.advantages)
                .map(|(&o, &a)| (Action::of(o), a))
        })
        .collect()
}

/// Gradient ascent on the clipped surrogate for `config.epochs` epochs.
pub fn policy_update(
    policy: &PolicyState,
    batch: &[ScoredGroup],
    config: &SimConfig,
) -> Result<PolicyState> {
    let mut next = policy.clone();
    let n = rollouts_in(batch);
    if n == 0 {
        return Ok(next);
    }
    for bucket in 0..policy.abstain_logit.len() {
        let samples = bucket_samples(batch, bucket);
        if samples.is_empty() {
            continue;
        }
        let terms = SurrogateTerms {
            samples: &samples,
            batch_rollouts: n,
            theta_old: policy.abstain_logit[bucket],
            theta_ref: policy.reference_logit[bucket],
            clip_eps: config.clip_eps,
            kl_beta: config.kl_beta,
        };
        let mut theta = terms.theta_old;
        for _ in 0..config.epochs {
            let grad = terms.gradient(theta);
            if !grad.is_finite() {
                return Err(Error::SimulationFault {
                    step: policy.step,
                    bucket,
                    detail: format!("non-finite gradient {grad}"),
                });
            }
            theta += config.lr * grad;
        }
        if !theta.is_finite() {
            return Err(Error::SimulationFault {
                step: policy.step,
                bucket,
                detail: format!("non-finite logit {theta}"),
            });
        }
        next.abstain_logit[bucket] = theta;
    }
    Ok(next)
}

/// Raises each bucket's solve probability by `rate` times the fraction of
/// its attempts that earned a positive advantage, capped at the bucket
/// ceiling. A no-op when growth is off.
pub fn capability_update(
    policy: &PolicyState,
    batch: &[ScoredGroup],
    config: &SimConfig,
    bank: &TaskBank,
) -> PolicyState {
    let mut next = policy.clone();
    let Some(rate) = config.capability_growth else {
        return next;
    };
    for (k, bucket) in bank.buckets.iter().enumerate() {
        let (mut attempts, mut positive) = (0usize, 0usize);
        for (action, adv) in bucket_samples(batch, k) {
            if action == Action::Attempt {
                attempts += 1;
                if adv > 0.0 {
                    positive += 1;
                }
            }
        }
        if attempts == 0 {
            continue;
        }
        let frac = positive as f64 / attempts as f64;
        next.solve_prob[k] = (next.solve_prob[k] + rate * frac).min(bucket.ceiling());
    }
    next
}

/// Scores a batch of groups with the configured method. UCPO computes the
/// per-group gain, fuses it with the mean gain of the batch's unfiltered
/// groups when enabled, then applies `tanh` when enabled.
pub fn score_batch(
    groups: Vec<(usize, RolloutGroup)>,
    config: &SimConfig,
) -> Result<Vec<ScoredGroup>> {
    match config.method {
        Method::Grpo | Method::GrpoUc => groups
            .into_iter()
            .map(|(bucket, group)| {
                let result = grpo_advantages(&group)?;
                Ok(ScoredGroup {
                    bucket,
                    group,
                    result,
                })
            })
            .collect(),
        Method::Ucpo => {
            let comps: Vec<_> = groups.iter().map(|(_, g)| g.composition()).collect();
            let samples: Vec<f64> = comps
                .iter()
                .filter(|c| !is_non_ternary(c))
                .map(|c| dura::gamma(c, &config.dura))
                .collect();
            let mean = dura::batch_mean(&samples);
            groups
                .into_iter()
                .zip(comps)
                .map(|((bucket, group), comp)| {
                    let gain = dura::gamma_pipeline(&comp, mean, &config.dura).gamma_final;
                    let result = ucpo_advantages(&group, gain, config.dura.eps)?;
                    Ok(ScoredGroup {
                        bucket,
                        group,
                        result,
                    })
                })
                .collect()
        }
    }
}

/// Per-step statistics over the rollouts sampled at that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub uncertainty_ratio: f64,
    pub accuracy: f64,
    pub hallucination: f64,
    pub paq: Option<f64>,
    pub f1: f64,
    pub mean_gamma: Option<f64>,
    /// Fraction of groups that carried no gradient (filtered).
    pub ntf_fraction: f64,
    pub mean_abstain_logit: f64,
}

impl StepMetrics {
    fn from_groups<'a>(groups: impl Iterator<Item = &'a ScoredGroup>, abstain_logit: f64) -> Option<Self> {
        let (mut r, mut w, mut u) = (0usize, 0usize, 0usize);
        let (mut n_groups, mut n_filtered) = (0usize, 0usize);
        let mut gammas = Vec::new();
        for s in groups {
            let c = s.result.composition;
            r += c.n_right;
            w += c.n_wrong;
            u += c.n_uncertain;
            n_groups += 1;
            if s.result.filtered {
                n_filtered += 1;
            } else if let Some(g) = s.result.gamma_used {
                gammas.push(g);
            }
        }
        if n_groups == 0 {
            return None;
        }
        let counts = EvalCounts::from_counts(r, w, u);
        Some(StepMetrics {
            uncertainty_ratio: counts.unc,
            accuracy: counts.acc,
            hallucination: counts.hal,
            paq: metrics::paq(&counts),
            f1: metrics::f1(&counts),
            mean_gamma: (!gammas.is_empty()).then(|| dura::batch_mean(&gammas)),
            ntf_fraction: n_filtered as f64 / n_groups as f64,
            mean_abstain_logit: abstain_logit,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub aggregate: StepMetrics,
    /// `None` for buckets that were not sampled at this step.
    pub buckets: Vec<Option<StepMetrics>>,
}

/// Runs `config.steps` updates and returns one record per step. Records
/// describe the rollouts drawn at that step, before the update.
pub fn run(config: &SimConfig, bank: &TaskBank) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    bank.validate()?;
    let scheme = config.effective_scheme();
    let chooser = WeightedIndex::new(bank.buckets.iter().map(|b| b.weight))
        .map_err(|e| Error::Config(format!("bucket weights: {e}")))?;
    let mut prompt_rng = ChaCha8Rng::seed_from_u64(config.seed);
    prompt_rng.set_stream(0);
    let mut bucket_rngs: Vec<ChaCha8Rng> = (0..bank.buckets.len())
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64 + 1);
            rng
        })
        .collect();

    let mut policy = PolicyState::new(bank, config.init_abstain_prob);
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        policy.step = step;
        let mut groups = Vec::with_capacity(bank.batch_size);
        for _ in 0..bank.batch_size {
            let k = chooser.sample(&mut prompt_rng);
            let group = sample_group(k, &policy, config.group_size, scheme, &mut bucket_rngs[k])?;
            groups.push((k, group));
        }
        let batch = score_batch(groups, config)?;

        let mean_logit = policy.abstain_logit.iter().sum::<f64>() / policy.abstain_logit.len() as f64;
        let aggregate = StepMetrics::from_groups(batch.iter(), mean_logit)
            .expect("batch_size >= 1 guarantees at least one group");
        let buckets = (0..bank.buckets.len())
            .map(|k| {
                StepMetrics::from_groups(
                    batch.iter().filter(|s| s.bucket == k),
                    policy.abstain_logit[k],
                )
            })
            .collect();
        records.push(TrajectoryRecord {
            step,
            aggregate,
            buckets,
        });

        policy = policy_update(&policy, &batch, config)?;
        policy = capability_update(&policy, &batch, config, bank);
    }
    Ok(records)
}

/// Abstention rate at which the gain crosses zero when a fraction `1 - p`
/// of answered rollouts are wrong, found by bisection in the `eps -> 0`
/// limit. This is the fixed point the uncertainty channel steers toward.
pub fn equilibrium_oracle(p: f64, params: &DuraParams) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "solve probability must lie in (0, 1), got {p}"
        )));
    }
    if params.w <= 0.0 {
        return Err(Error::Config("equilibrium needs w > 0".into()));
    }
    let beta = 1.0 - p;
    let f = |u: f64| dura::gamma_on_profile(beta, u, params.w, 0.0);
    // f(0) = 1 > 0 and f -> -w * p < 0 as u -> 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut mid = 0.5;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < 1e-12 || hi - lo < 1e-15 {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const METRIC_COLUMNS: [&str; 8] = [
    "uncertainty_ratio",
    "accuracy",
    "hallucination",
    "paq",
    "f1",
    "mean_gamma",
    "ntf_fraction",
    "mean_abstain_logit",
];

fn metric_cells(m: Option<&StepMetrics>) -> Vec<String> {
    match m {
        None => vec![String::new(); METRIC_COLUMNS.len()],
        Some(m) => vec![
            m.uncertainty_ratio.to_string(),
            m.accuracy.to_string(),
            m.hallucination.to_string(),
            fmt_opt(m.paq),
            m.f1.to_string(),
            fmt_opt(m.mean_gamma),
            m.ntf_fraction.to_string(),
            m.mean_abstain_logit.to_string(),
        ],
    }
}

/// One row per step: `step`, the aggregate columns, then `b{k}_`-prefixed
/// columns per bucket. Undefined values are empty cells.
pub fn write_trajectory_csv<W: std::io::Write>(records: &[TrajectoryRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let n_buckets = records.first().map_or(0, |r| r.buckets.len());
    let mut header = vec!["step".to_string()];
    header.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    for k in 0..n_buckets {
        header.extend(METRIC_COLUMNS.iter().map(|c| format!("b{k}_{c}")));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.step.to_string()];
        row.extend(metric_cells(Some(&r.aggregate)));
        for b in &r.buckets {
            row.extend(metric_cells(b.as_ref()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_jsonl<W: std::io::Write>(records: &[TrajectoryRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
