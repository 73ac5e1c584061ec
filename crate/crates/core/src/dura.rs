//! Dynamic gain for the uncertainty channel.
//!
//! The per-group gain is
//!
//! ```text
//! gamma = P_w / (P_u + P_w + eps) * (1 - P_u)  -  w * P_r / (P_r + P_w + eps) * P_u
//! ```
//!
//! The first term rewards abstention when errors dominate the answered
//! rollouts; the second penalizes abstention in proportion to how often the
//! answered rollouts are right. For small groups the sample gain can be
//! smoothed toward the batch mean and stretched with `tanh`, applied in that
//! order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::GroupComposition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuraParams {
    /// Suppression weight on the second term.
    pub w: f64,
    pub eps: f64,
    /// Weight of the per-group gain in batch fusion.
    pub lambda: f64,
    /// Scale inside the `tanh` stretch.
    pub alpha: f64,
    pub enable_fusion: bool,
    pub enable_tanh: bool,
}

impl Default for DuraParams {
    fn default() -> Self {
        DuraParams {
            w: 1.0,
            eps: 1e-6,
            lambda: 0.5,
            alpha: 2.0,
            enable_fusion: false,
            enable_tanh: false,
        }
    }
}

impl DuraParams {
    /// Defaults with batch fusion and `tanh` stretching switched on.
    pub fn low_resource() -> Self {
        DuraParams {
            enable_fusion: true,
            enable_tanh: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w.is_finite() && self.w >= 0.0) {
            return Err(Error::Config(format!("w must be >= 0, got {}", self.w)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One evaluated composition with every stage of the gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRecord {
    pub composition: GroupComposition,
    pub gamma_sample: f64,
    pub gamma_fused: f64,
    pub gamma_final: f64,
    /// Number of ordered groups with this composition (enumeration only).
    /// Exact while it fits in 53 bits, a floating-point approximation beyond.
    pub multiplicity: f64,
}

/// Gain on raw ratios. `eps` may be zero when the caller guarantees non-zero
/// denominators.
pub fn gamma_from_ratios(p_right: f64, p_wrong: f64, p_uncertain: f64, w: f64, eps: f64) -> f64 {
    let gain = p_wrong / (p_uncertain + p_wrong + eps) * (1.0 - p_uncertain);
    let suppression = p_right / (p_right + p_wrong + eps) * p_uncertain;
    gain - w * suppression
}

pub fn gamma(comp: &GroupComposition, params: &DuraParams) -> f64 {
    let (pr, pw, pu) = comp.ratios();
    gamma_from_ratios(pr, pw, pu, params.w, params.eps)
}

/// Gain along a fixed correctness profile: the Wrong share of answered
/// rollouts is `beta` and the abstention rate is `p_uncertain`.
pub fn gamma_on_profile(beta: f64, p_uncertain: f64, w: f64, eps: f64) -> f64 {
    let answered = 1.0 - p_uncertain;
    gamma_from_ratios((1.0 - beta) * answered, beta * answered, p_uncertain, w, eps)
}

/// `lambda * gamma_sample + (1 - lambda) * gamma_batch_mean`.
pub fn fuse_batch(gamma_sample: f64, gamma_batch_mean: f64, params: &DuraParams) -> f64 {
    params.lambda * gamma_sample + (1.0 - params.lambda) * gamma_batch_mean
}

pub fn tanh_map(gamma_fused: f64, params: &DuraParams) -> f64 {
    (params.alpha * gamma_fused).tanh()
}

/// Sample gain, then batch fusion, then `tanh`; disabled stages pass through.
pub fn gamma_pipeline(comp: &GroupComposition, batch_mean: f64, params: &DuraParams) -> GammaRecord {
    let gamma_sample = gamma(comp, params);
    let gamma_fused = if params.enable_fusion {
        fuse_batch(gamma_sample, batch_mean, params)
    } else {
        gamma_sample
    };
    let gamma_final = if params.enable_tanh {
        tanh_map(gamma_fused, params)
    } else {
        gamma_fused
    };
    GammaRecord {
        composition: *comp,
        gamma_sample,
        gamma_fused,
        gamma_final,
        multiplicity: 1.0,
    }
}

/// Mean of `gammas`, or 0 for an empty batch.
pub fn batch_mean(gammas: &[f64]) -> f64 {
    if gammas.is_empty() {
        0.0
    } else {
        gammas.iter().sum::<f64>() / gammas.len() as f64
    }
}

/// `g! / (a! b! c!)`. Exact integer arithmetic while the intermediate
/// products fit in `u128`; large groups fall back to floating point.
pub fn multinomial(a: usize, b: usize, c: usize) -> f64 {
    match (binomial_exact(a + b + c, a), binomial_exact(b + c, b)) {
        (Some(x), Some(y)) => match x.checked_mul(y) {
            Some(v) => v as f64,
            None => x as f64 * y as f64,
        },
        _ => binomial_approx(a + b + c, a) * binomial_approx(b + c, b),
    }
}

fn binomial_exact(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

fn binomial_approx(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw gain of every composition of `g` with at least one rollout of each
/// class, i.e. every group that survives filtering and has a non-empty
/// uncertainty channel. Fusion and `tanh` are not applied.
pub fn enumerate_gamma_distribution(g: usize, params: &DuraParams) -> Vec<GammaRecord> {
    GroupComposition::enumerate(g)
        .filter(|c| c.n_right >= 1 && c.n_wrong >= 1 && c.n_uncertain >= 1)
        .map(|c| {
            let value = gamma(&c, params);
            GammaRecord {
                composition: c,
                gamma_sample: value,
                gamma_fused: value,
                gamma_final: value,
                multiplicity: multinomial(c.n_right, c.n_wrong, c.n_uncertain),
            }
        })
        .collect()
}

/// Writes `n_r,n_w,n_u,multiplicity,gamma` rows.
pub fn write_gamma_csv<W: std::io::Write>(records: &[GammaRecord], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(["n_r", "n_w", "n_u", "multiplicity", "gamma"])?;
    for r in records {
        writer.write_record([
            r.composition.n_right.to_string(),
            r.composition.n_wrong.to_string(),
            r.composition.n_uncertain.to_string(),
            r.multiplicity.to_string(),
            r.gamma_sample.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exact() -> DuraParams {
        DuraParams {
            eps: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn gamma_extremes_for_eight_rollouts() {
        let lo = gamma(&GroupComposition::new(2, 1, 5), &exact());
        let hi = gamma(&GroupComposition::new(1, 6, 1), &exact());
        assert_abs_diff_eq!(lo, -0.354_166_666_666_666_63, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.732_142_857_142_857_1, epsilon = 1e-12);
        // default eps moves values by well under 1e-4
        let p = DuraParams::default();
        assert_abs_diff_eq!(gamma(&GroupComposition::new(2, 1, 5), &p), lo, epsilon = 1e-4);
        assert_abs_diff_eq!(gamma(&GroupComposition::new(1, 6, 1), &p), hi, epsilon = 1e-4);
    }

    #[test]
    fn gamma_equal_thirds() {
        let v = gamma(&GroupComposition::new(1, 1, 1), &exact());
        assert_abs_diff_eq!(v, 1.0 / 3.0 - 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn fusion() {
        let p = DuraParams::default();
        assert_abs_diff_eq!(fuse_batch(0.4, 0.2, &p), 0.3, epsilon = 1e-15);
        for lambda in [0.0, 0.3, 1.0] {
            let p = DuraParams { lambda, ..p };
            assert_abs_diff_eq!(fuse_batch(0.17, 0.17, &p), 0.17, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            fuse_batch(0.732_142_857_142_857_1, -0.354_166_666_666_666_63, &p),
            0.188_988_095_238_095_23,
            epsilon = 1e-12
        );
    }

    #[test]
    fn tanh_stretch() {
        let p = DuraParams::default();
        assert_eq!(tanh_map(0.0, &p), 0.0);
        assert_abs_diff_eq!(tanh_map(0.732_142_857_142_857_1, &p), 0.898_481_773_809_246_5, epsilon = 1e-12);
        assert_abs_diff_eq!(tanh_map(-0.354_166_666_666_666_63, &p), -0.609_630_645_972_319_5, epsilon = 1e-12);
    }

    #[test]
    fn pipeline_stage_order() {
        let off = DuraParams::default();
        let c = GroupComposition::new(3, 2, 3);
        let r = gamma_pipeline(&c, 0.7, &off);
        assert_eq!(r.gamma_final, r.gamma_sample);

        let both = DuraParams {
            eps: 0.0,
            ..DuraParams::low_resource()
        };
        let r = gamma_pipeline(&GroupComposition::new(1, 6, 1), 0.0, &both);
        assert_abs_diff_eq!(r.gamma_fused, 0.366_071_428_571_428_55, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gamma_final, 0.624_374_577_216_547_2, epsilon = 1e-12);

        let tanh_only = DuraParams {
            enable_tanh: true,
            eps: 0.0,
            ..Default::default()
        };
        let r = gamma_pipeline(&GroupComposition::new(2, 1, 5), 123.0, &tanh_only);
        assert_abs_diff_eq!(r.gamma_final, -0.609_630_645_972_319_5, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_small_groups() {
        let p = exact();
        let g3 = enumerate_gamma_distribution(3, &p);
        assert_eq!(g3.len(), 1);
        assert_abs_diff_eq!(g3[0].gamma_sample, 1.0 / 6.0, epsilon = 1e-12);
        assert_eq!(g3[0].multiplicity, 6.0);

        let g4 = enumerate_gamma_distribution(4, &p);
        let got: Vec<_> = g4
            .iter()
            .map(|r| (r.composition.n_right, r.composition.n_wrong, r.composition.n_uncertain, r.gamma_sample))
            .collect();
        let expected = [
            (1, 1, 2, -0.083_333_333_333_333_34),
            (1, 2, 1, 0.416_666_666_666_666_7),
            (2, 1, 1, 0.208_333_333_333_333_34),
        ];
        assert_eq!(got.len(), 3);
        for (g, e) in got.iter().zip(expected) {
            assert_eq!((g.0, g.1, g.2), (e.0, e.1, e.2));
            assert_abs_diff_eq!(g.3, e.3, epsilon = 1e-12);
        }
        assert!(enumerate_gamma_distribution(2, &p).is_empty());
    }

    #[test]
    fn enumeration_eight() {
        let recs = enumerate_gamma_distribution(8, &DuraParams::default());
        assert_eq!(recs.len(), 21);
        let min = recs.iter().map(|r| r.gamma_sample).fold(f64::INFINITY, f64::min);
        let max = recs.iter().map(|r| r.gamma_sample).fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(min, -0.354, epsilon = 1e-3);
        assert_abs_diff_eq!(max, 0.732, epsilon = 1e-3);
        // multiplicities of compositions with all parts >= 1 sum to 3^8 - 3*2^8 + 3
        let total: f64 = recs.iter().map(|r| r.multiplicity).sum();
        assert_eq!(total, (6561 - 3 * 256 + 3) as f64);
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(1, 1, 1), 6.0);
        assert_eq!(multinomial(2, 1, 5), 168.0);
        assert_eq!(multinomial(8, 0, 0), 1.0);
        assert_eq!(multinomial(10, 10, 10), 5_550_996_791_340.0);
    }

    #[test]
    fn multinomial_stays_finite_for_large_groups() {
        // 3^128 ordered groups in total; the middle term is within a few
        // orders of magnitude of that
        let mid = multinomial(43, 43, 42);
        assert!(mid.is_finite() && mid > 1e58 && mid < 3f64.powi(128));
        let total: f64 = GroupComposition::enumerate(128)
            .map(|c| multinomial(c.n_right, c.n_wrong, c.n_uncertain))
            .sum();
        assert!((total / 3f64.powi(128) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        assert!(DuraParams::default().validate().is_ok());
        assert!(DuraParams { lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(DuraParams { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(DuraParams { eps: 0.0, ..Default::default() }.validate().is_err());
        assert!(DuraParams { w: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn gamma_csv_layout() {
        let mut buf = Vec::new();
        write_gamma_csv(&enumerate_gamma_distribution(3, &DuraParams::default()), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n_r,n_w,n_u,multiplicity,gamma"));
        assert!(lines.next().unwrap().starts_with("1,1,1,6,0.16666"));
        assert!(!text.contains('\r'));
    }
}
