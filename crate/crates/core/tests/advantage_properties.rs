use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ucpo::advantage::{grpo_advantages, ucpo_advantages, ucpo_advantages_unregularized};
use ucpo::{
    dura, uncertain_advantage_sign_boundary, DuraParams, GroupComposition, Outcome, RewardScheme,
    RolloutGroup,
};

fn outcomes() -> impl Strategy<Value = Vec<Outcome>> {
    prop::collection::vec(prop::sample::select(Outcome::ALL.to_vec()), 2..64)
}

fn ternary_scheme() -> impl Strategy<Value = RewardScheme> {
    (-2.0f64..2.0, 0.05f64..3.0, 0.02f64..0.98).prop_map(|(wrong, span, frac)| RewardScheme {
        right: wrong + span,
        wrong,
        uncertain: wrong + frac * span,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn grpo_advantages_sum_to_zero(o in outcomes(), scheme in ternary_scheme(), binary in any::<bool>()) {
        let scheme = if binary { scheme.to_binary() } else { scheme };
        let g = RolloutGroup::new(o, scheme).unwrap();
        let r = grpo_advantages(&g).unwrap();
        let sum: f64 = r.advantages.iter().sum();
        prop_assert!(sum.abs() <= 1e-9 * g.len() as f64, "sum {sum}");
        if r.filtered {
            prop_assert!(r.advantages.iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn ucpo_channels_are_consistent(o in outcomes(), gain in -1.0f64..1.0) {
        let g = RolloutGroup::new(o, RewardScheme::canonical_ternary()).unwrap();
        let r = ucpo_advantages_unregularized(&g, gain).unwrap();
        if r.filtered {
            prop_assert!(r.advantages.iter().all(|a| *a == 0.0));
            return Ok(());
        }
        let det: Vec<f64> = g.outcomes().iter().zip(&r.advantages)
            .filter(|(o, _)| o.is_deterministic()).map(|(_, a)| *a).collect();
        let sum: f64 = det.iter().sum();
        prop_assert!(sum.abs() <= 1e-6 * det.len() as f64);
        let anchor = r.anchor_right.unwrap();
        prop_assert!(anchor > 0.0);
        for (o, a) in g.outcomes().iter().zip(&r.advantages) {
            match o {
                Outcome::Right => prop_assert!(*a > 0.0),
                Outcome::Wrong => prop_assert!(*a < 0.0),
                Outcome::Uncertain => {
                    prop_assert!((a - gain * anchor).abs() <= 1e-12);
                    if gain != 0.0 {
                        prop_assert_eq!(a.signum(), gain.signum());
                    }
                }
            }
        }
    }

    #[test]
    fn grpo_uc_sign_matches_closed_form_boundary(
        n_r in 0usize..40, n_w in 0usize..40, n_u in 1usize..40,
        scheme in ternary_scheme(),
    ) {
        prop_assume!(n_r + n_w + n_u >= 2);
        let comp = GroupComposition::new(n_r, n_w, n_u);
        let g = RolloutGroup::from_composition(&comp, scheme).unwrap();
        let r = grpo_advantages(&g).unwrap();
        prop_assume!(!r.filtered);
        let unc = r.advantage_of(&g, Outcome::Uncertain).unwrap();
        // compare n_r (r_r - r_u) against n_w (r_u - r_w): the boundary
        // condition P_r / P_w = threshold without dividing by zero
        let lhs = n_r as f64 * (scheme.right - scheme.uncertain);
        let rhs = n_w as f64 * (scheme.uncertain - scheme.wrong);
        let threshold = uncertain_advantage_sign_boundary(&scheme).unwrap();
        if (lhs - rhs).abs() > 1e-9 * (lhs.abs() + rhs.abs()) {
            prop_assert_eq!(unc < 0.0, lhs > rhs, "thr {}", threshold);
            prop_assert_eq!(unc > 0.0, lhs < rhs);
        }
    }

    #[test]
    fn advantages_are_permutation_equivariant(o in outcomes(), seed in any::<u64>(), gain in -1.0f64..1.0) {
        let scheme = RewardScheme::canonical_ternary();
        let mut idx: Vec<usize> = (0..o.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Outcome> = idx.iter().map(|&i| o[i]).collect();
        let a = RolloutGroup::new(o, scheme).unwrap();
        let b = RolloutGroup::new(shuffled, scheme).unwrap();

        let ra = grpo_advantages(&a).unwrap();
        let rb = grpo_advantages(&b).unwrap();
        for (j, &i) in idx.iter().enumerate() {
            prop_assert_eq!(rb.advantages[j], ra.advantages[i]);
        }
        let ua = ucpo_advantages(&a, gain, 1e-6).unwrap();
        let ub = ucpo_advantages(&b, gain, 1e-6).unwrap();
        for (j, &i) in idx.iter().enumerate() {
            prop_assert_eq!(ub.advantages[j], ua.advantages[i]);
        }
    }

    #[test]
    fn reward_scale_invariance(o in outcomes(), c in 0.01f64..100.0, gain in -1.0f64..1.0) {
        let base = RewardScheme::canonical_ternary();
        let scaled = RewardScheme { right: base.right * c, wrong: base.wrong * c, uncertain: base.uncertain * c };
        let a = RolloutGroup::new(o.clone(), base).unwrap();
        let b = RolloutGroup::new(o, scaled).unwrap();
        let (ra, rb) = (grpo_advantages(&a).unwrap(), grpo_advantages(&b).unwrap());
        for (x, y) in ra.advantages.iter().zip(&rb.advantages) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let (ua, ub) = (
            ucpo_advantages_unregularized(&a, gain).unwrap(),
            ucpo_advantages_unregularized(&b, gain).unwrap(),
        );
        for (x, y) in ua.advantages.iter().zip(&ub.advantages) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn gain_from_composition_sets_uncertain_sign(o in outcomes()) {
        let g = RolloutGroup::new(o, RewardScheme::canonical_ternary()).unwrap();
        let gain = dura::gamma(&g.composition(), &DuraParams::default());
        let r = ucpo_advantages(&g, gain, 1e-6).unwrap();
        if let (false, Some(u)) = (r.filtered, r.advantage_of(&g, Outcome::Uncertain)) {
            if gain != 0.0 {
                prop_assert_eq!(u.signum(), gain.signum());
            }
        }
    }
}

#[test]
fn eps_shifts_deterministic_magnitudes_slightly() {
    let g = RolloutGroup::parse("RRRWWWUU", RewardScheme::canonical_ternary()).unwrap();
    let with = ucpo_advantages(&g, 0.325, 1e-6).unwrap();
    let without = ucpo_advantages_unregularized(&g, 0.325).unwrap();
    assert_eq!(without.advantages[..6], [1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
    for (a, b) in with.advantages.iter().zip(&without.advantages) {
        assert!((a - b).abs() < 1e-5);
    }
}
