//! Exhaustive advantage landscapes over the composition simplex.
//!
//! For a group size `G` every integer composition `(n_r, n_w, n_u)` with
//! `n_r + n_w + n_u = G` is turned into a canonical group and pushed through
//! the advantage engine. The resulting points are the data behind ternary
//! plots of the uncertain-rollout advantage and the net right advantage.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{
    grpo_advantages, net_right_advantage, ucpo_advantages, Method,
};
use crate::dura::{self, DuraParams};
use crate::error::{Error, Result};
use crate::rollout::{is_non_ternary, GroupComposition, Outcome, RewardScheme, RolloutGroup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub composition: GroupComposition,
    pub method: Method,
    /// Advantage of one Uncertain rollout; 0 when there is none or the group
    /// is filtered.
    pub uncertain_advantage: f64,
    pub net_right_advantage: f64,
    pub filtered: bool,
}

/// Scheme actually used by `method`: plain GRPO scores Uncertain as Wrong.
fn scheme_for(method: Method, scheme: &RewardScheme) -> RewardScheme {
    match method {
        Method::Grpo => scheme.to_binary(),
        Method::GrpoUc | Method::Ucpo => *scheme,
    }
}

/// Evaluates one composition under one method. UCPO uses the per-group gain
/// only; fusion and `tanh` are ignored here.
pub fn evaluate_point(
    comp: &GroupComposition,
    method: Method,
    scheme: &RewardScheme,
    params: &DuraParams,
) -> Result<SweepPoint> {
    let group = RolloutGroup::from_composition(comp, scheme_for(method, scheme))?;
    let result = match method {
        Method::Grpo | Method::GrpoUc => grpo_advantages(&group)?,
        Method::Ucpo => ucpo_advantages(&group, dura::gamma(comp, params), params.eps)?,
    };
    let uncertain_advantage = if result.filtered {
        0.0
    } else {
        result.advantage_of(&group, Outcome::Uncertain).unwrap_or(0.0)
    };
    Ok(SweepPoint {
        composition: *comp,
        method,
        uncertain_advantage,
        net_right_advantage: net_right_advantage(&result, &group),
        filtered: result.filtered,
    })
}

/// One point per composition of `g` and requested method, ordered by
/// composition and then by method.
pub fn sweep(
    g: usize,
    scheme: &RewardScheme,
    methods: &[Method],
    params: &DuraParams,
) -> Result<Vec<SweepPoint>> {
    if g < 2 {
        return Err(Error::InvalidInput(format!("group size must be >= 2, got {g}")));
    }
    if methods.iter().any(|m| *m != Method::Grpo) && !scheme.is_ternary() {
        return Err(Error::Config(
            "GRPO-UC and UCPO sweeps need a ternary scheme".into(),
        ));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let comps: Vec<_> = GroupComposition::enumerate(g).collect();
    let nested: Vec<Vec<SweepPoint>> = comps
        .par_iter()
        .map(|c| {
            methods
                .iter()
                .map(|&m| evaluate_point(c, m, scheme, params))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// A sweep point at real-valued class counts, for smooth plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPoint {
    pub n_right: f64,
    pub n_wrong: f64,
    pub n_uncertain: f64,
    pub method: Method,
    pub uncertain_advantage: f64,
    pub net_right_advantage: f64,
    pub filtered: bool,
}

/// Evaluates the advantage formulas on the ratio grid `i / density` and
/// scales counts by `g`. At grid points with integer counts the values agree
/// with [`sweep`].
pub fn sweep_continuous(
    g: usize,
    scheme: &RewardScheme,
    methods: &[Method],
    params: &DuraParams,
    density: usize,
) -> Result<Vec<ContinuousPoint>> {
    if density == 0 {
        return Err(Error::InvalidInput("grid density must be >= 1".into()));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let gf = g as f64;
    let d = density as f64;
    let mut out = Vec::new();
    for i in 0..=density {
        for j in 0..=density - i {
            let k = density - i - j;
            let (pr, pw, pu) = (i as f64 / d, j as f64 / d, k as f64 / d);
            for &m in &methods {
                let s = scheme_for(m, scheme);
                let (unc, net, filtered) = continuous_values(m, &s, pr, pw, pu, params);
                out.push(ContinuousPoint {
                    n_right: pr * gf,
                    n_wrong: pw * gf,
                    n_uncertain: pu * gf,
                    method: m,
                    uncertain_advantage: unc,
                    net_right_advantage: net * gf,
                    filtered,
                });
            }
        }
    }
    Ok(out)
}

/// (uncertain advantage, net right advantage per rollout, filtered)
fn continuous_values(
    method: Method,
    s: &RewardScheme,
    pr: f64,
    pw: f64,
    pu: f64,
    params: &DuraParams,
) -> (f64, f64, bool) {
    match method {
        Method::Grpo | Method::GrpoUc => {
            let mean = pr * s.right + pw * s.wrong + pu * s.uncertain;
            let var = pr * (s.right - mean).powi(2)
                + pw * (s.wrong - mean).powi(2)
                + pu * (s.uncertain - mean).powi(2);
            let std = var.sqrt();
            if std < crate::advantage::ZERO_VARIANCE_GUARD {
                return (0.0, 0.0, true);
            }
            let a_r = (s.right - mean) / std;
            let a_u = if pu > 0.0 { (s.uncertain - mean) / std } else { 0.0 };
            (a_u, pr * a_r - pu * a_u, false)
        }
        Method::Ucpo => {
            if pr == 0.0 || pw == 0.0 {
                return (0.0, 0.0, true);
            }
            let det = pr + pw;
            let mean = (pr * s.right + pw * s.wrong) / det;
            let std = ((pr * (s.right - mean).powi(2) + pw * (s.wrong - mean).powi(2)) / det).sqrt();
            let anchor = (s.right - mean) / (std + params.eps);
            let gamma = dura::gamma_from_ratios(pr, pw, pu, params.w, params.eps);
            let a_u = if pu > 0.0 { gamma * anchor } else { 0.0 };
            (a_u, pr * anchor - pu * a_u, false)
        }
    }
}

fn csv_writer<W: std::io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

const SWEEP_HEADER: [&str; 7] = [
    "n_r",
    "n_w",
    "n_u",
    "method",
    "uncertain_advantage",
    "net_right_advantage",
    "filtered",
];

pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.composition.n_right.to_string(),
            p.composition.n_wrong.to_string(),
            p.composition.n_uncertain.to_string(),
            p.method.to_string(),
            p.uncertain_advantage.to_string(),
            p.net_right_advantage.to_string(),
            p.filtered.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_continuous_csv<W: std::io::Write>(points: &[ContinuousPoint], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.n_right.to_string(),
            p.n_wrong.to_string(),
            p.n_uncertain.to_string(),
            p.method.to_string(),
            p.uncertain_advantage.to_string(),
            p.net_right_advantage.to_string(),
            p.filtered.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the sweep to `destination`. The sweep must be non-empty.
pub fn emit_sweep_csv(points: &[SweepPoint], destination: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("refusing to write an empty sweep".into()));
    }
    let file = std::fs::File::create(destination).map_err(|e| Error::io(destination, e))?;
    write_sweep_csv(points, std::io::BufWriter::new(file))
}

/// Checks the UCPO sweep identity `net = A_right * (n_r - n_u * gamma)` and
/// the filter flag for one point. Returns `None` when the point is consistent.
pub fn ucpo_point_violation(
    point: &SweepPoint,
    scheme: &RewardScheme,
    params: &DuraParams,
    tol: f64,
) -> Option<String> {
    if point.filtered != is_non_ternary(&point.composition) {
        return Some(format!("{}: filter flag mismatch", point.composition));
    }
    if point.filtered {
        return None;
    }
    let c = point.composition;
    let g = dura::gamma(&c, params);
    let group = RolloutGroup::from_composition(&c, *scheme).ok()?;
    let res = ucpo_advantages(&group, g, params.eps).ok()?;
    let anchor = res.anchor_right?;
    let expected = anchor * (c.n_right as f64 - c.n_uncertain as f64 * g);
    if (point.net_right_advantage - expected).abs() > tol {
        return Some(format!(
            "{c}: net {} != {expected}",
            point.net_right_advantage
        ));
    }
    if c.n_uncertain > 0 && point.uncertain_advantage.signum() != g.signum() && g != 0.0 {
        return Some(format!("{c}: sign of uncertain advantage differs from gain"));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn find(points: &[SweepPoint], c: (usize, usize, usize), m: Method) -> SweepPoint {
        *points
            .iter()
            .find(|p| p.method == m && p.composition == GroupComposition::new(c.0, c.1, c.2))
            .unwrap()
    }

    #[test]
    fn landscape_reference_points() {
        let scheme = RewardScheme::canonical_ternary();
        let params = DuraParams::default();
        let pts = sweep(8, &scheme, &[Method::GrpoUc, Method::Ucpo], &params).unwrap();
        assert_eq!(pts.len(), 90);

        let p = find(&pts, (6, 1, 1), Method::GrpoUc);
        assert_abs_diff_eq!(p.uncertain_advantage, -0.152_498_570_332_604_47, epsilon = 1e-9);

        let p = find(&pts, (1, 1, 6), Method::GrpoUc);
        assert_abs_diff_eq!(p.net_right_advantage, -0.621_149_556_591_281, epsilon = 1e-9);

        let p = find(&pts, (1, 1, 6), Method::Ucpo);
        assert_abs_diff_eq!(p.uncertain_advantage, -0.339_285_714_285_714_3, epsilon = 1e-5);
        assert!(p.net_right_advantage > 0.0);
        assert_abs_diff_eq!(p.net_right_advantage, 3.035_714_285_714_285_6, epsilon = 1e-4);
    }

    #[test]
    fn row_counts_and_order() {
        let pts = sweep(2, &RewardScheme::standard_binary(), &[Method::Grpo], &DuraParams::default()).unwrap();
        assert_eq!(pts.len(), 6);
        let comps: Vec<_> = pts.iter().map(|p| p.composition).collect();
        assert!(comps.windows(2).all(|w| w[0] < w[1]));

        let pts = sweep(
            8,
            &RewardScheme::canonical_ternary(),
            &[Method::Ucpo, Method::Grpo, Method::GrpoUc],
            &DuraParams::default(),
        )
        .unwrap();
        assert_eq!(pts.len(), 3 * 45);
        assert_eq!(pts[0].method, Method::Grpo);
        assert_eq!(pts[2].method, Method::Ucpo);
    }

    #[test]
    fn csv_is_deterministic() {
        let scheme = RewardScheme::canonical_ternary();
        let run = || {
            let pts = sweep(16, &scheme, &Method::ALL, &DuraParams::default()).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&pts, &mut buf).unwrap();
            buf
        };
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("n_r,n_w,n_u,method,uncertain_advantage,net_right_advantage,filtered\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 153);
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let pts = sweep(3, &RewardScheme::canonical_ternary(), &[Method::Ucpo], &DuraParams::default()).unwrap();
        let err = emit_sweep_csv(&pts, Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
        assert!(emit_sweep_csv(&[], Path::new("/tmp/never.csv")).is_err());
    }

    #[test]
    fn binary_scheme_rejected_for_ternary_methods() {
        assert!(sweep(4, &RewardScheme::standard_binary(), &[Method::Ucpo], &DuraParams::default()).is_err());
    }

    #[test]
    fn continuous_grid_agrees_with_integer_sweep() {
        let scheme = RewardScheme::canonical_ternary();
        let params = DuraParams::default();
        let ints = sweep(8, &scheme, &Method::ALL, &params).unwrap();
        let conts = sweep_continuous(8, &scheme, &Method::ALL, &params, 8).unwrap();
        assert_eq!(conts.len(), ints.len());
        for c in &conts {
            let comp = GroupComposition::new(
                c.n_right.round() as usize,
                c.n_wrong.round() as usize,
                c.n_uncertain.round() as usize,
            );
            let i = find(&ints, (comp.n_right, comp.n_wrong, comp.n_uncertain), c.method);
            assert_eq!(i.filtered, c.filtered, "{comp} {}", c.method);
            assert_abs_diff_eq!(i.uncertain_advantage, c.uncertain_advantage, epsilon = 1e-9);
            assert_abs_diff_eq!(i.net_right_advantage, c.net_right_advantage, epsilon = 1e-9);
        }
    }
}
