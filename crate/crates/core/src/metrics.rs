//! Abstention-aware evaluation metrics.
//!
//! Answers fall into accuracy (right), hallucination (wrong) and uncertainty
//! (abstained). PAQ is precision over answered questions, `acc / (acc + hal)`,
//! and is undefined when nothing was answered. F1 is the harmonic mean of PAQ
//! and accuracy, so it coincides with both when nothing is abstained and
//! collapses toward zero under near-total abstention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{StepMetrics, TrajectoryRecord};

/// Tolerance on `acc + hal + unc == 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCounts {
    pub acc: f64,
    pub hal: f64,
    pub unc: f64,
}

impl EvalCounts {
    pub fn new(acc: f64, hal: f64, unc: f64) -> Result<Self> {
        let c = EvalCounts { acc, hal, unc };
        c.validate()?;
        Ok(c)
    }

    pub fn from_counts(right: usize, wrong: usize, uncertain: usize) -> Self {
        let n = (right + wrong + uncertain).max(1) as f64;
        EvalCounts {
            acc: right as f64 / n,
            hal: wrong as f64 / n,
            unc: uncertain as f64 / n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("acc", self.acc), ("hal", self.hal), ("unc", self.unc)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let sum = self.acc + self.hal + self.unc;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "acc + hal + unc must equal 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Precision on answered questions; `None` when every question was abstained.
pub fn paq(counts: &EvalCounts) -> Option<f64> {
    let answered = counts.acc + counts.hal;
    (answered > 0.0).then(|| counts.acc / answered)
}

/// Harmonic mean of PAQ and accuracy; 0 when nothing is correct.
pub fn f1(counts: &EvalCounts) -> f64 {
    if counts.acc <= 0.0 {
        return 0.0;
    }
    match paq(counts) {
        Some(precision) => 2.0 * precision * counts.acc / (precision + counts.acc),
        None => 0.0,
    }
}

/// Trailing-window means of a trajectory, overall and per bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub window: usize,
    pub records: usize,
    pub aggregate: WindowMeans,
    pub buckets: Vec<Option<WindowMeans>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMeans {
    pub uncertainty_ratio: f64,
    pub accuracy: f64,
    pub hallucination: f64,
    /// Mean over the records where PAQ is defined.
    pub paq: Option<f64>,
    /// Records in the window whose PAQ was undefined.
    pub paq_undefined: usize,
    pub f1: f64,
    pub mean_gamma: Option<f64>,
    pub ntf_fraction: f64,
    pub mean_abstain_logit: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn window_means(items: &[&StepMetrics]) -> Option<WindowMeans> {
    if items.is_empty() {
        return None;
    }
    let avg = |f: fn(&StepMetrics) -> f64| mean_of(items.iter().map(|m| f(m))).unwrap_or(0.0);
    Some(WindowMeans {
        uncertainty_ratio: avg(|m| m.uncertainty_ratio),
        accuracy: avg(|m| m.accuracy),
        hallucination: avg(|m| m.hallucination),
        paq: mean_of(items.iter().filter_map(|m| m.paq)),
        paq_undefined: items.iter().filter(|m| m.paq.is_none()).count(),
        f1: avg(|m| m.f1),
        mean_gamma: mean_of(items.iter().filter_map(|m| m.mean_gamma)),
        ntf_fraction: avg(|m| m.ntf_fraction),
        mean_abstain_logit: avg(|m| m.mean_abstain_logit),
    })
}

/// Means over the last `window` records (all records when the window is
/// larger than the trajectory).
pub fn aggregate(records: &[TrajectoryRecord], window: usize) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate an empty trajectory".into()));
    }
    if window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }
    let tail = &records[records.len().saturating_sub(window)..];
    let agg: Vec<&StepMetrics> = tail.iter().map(|r| &r.aggregate).collect();
    let n_buckets = tail.iter().map(|r| r.buckets.len()).max().unwrap_or(0);
    let buckets = (0..n_buckets)
        .map(|k| {
            let items: Vec<&StepMetrics> = tail
                .iter()
                .filter_map(|r| r.buckets.get(k).and_then(Option::as_ref))
                .collect();
            window_means(&items)
        })
        .collect();
    Ok(Summary {
        window: tail.len(),
        records: records.len(),
        aggregate: window_means(&agg).expect("tail is non-empty"),
        buckets,
    })
}
