use std::f64::consts::PI;

use proper_rank::bounds::main_bound_rhs;
use proper_rank::construct::{
    certify_proper, certify_strongly_proper, from_concave_risk, strong_concavity_modulus, ConcaveRiskSpec, Grid,
};
use proper_rank::regret::{ranking_regret, surrogate_regret};
use proper_rank::trials::{random_trial, ScoreStyle};
use proper_rank::{BinaryLoss, Interval};
use proptest::prelude::*;

/// `a eta(1-eta) + b sqrt(eta(1-eta)) + c sin(pi eta)`, a smooth concave risk
/// with its derivative and `-H''`.
fn mixture(a: f64, b: f64, c: f64) -> ConcaveRiskSpec {
    let h = move |e: f64| a * e * (1.0 - e) + b * (e * (1.0 - e)).sqrt() + c * (PI * e).sin();
    let dh = move |e: f64| {
        let u = e * (1.0 - e);
        let root = if u > 0.0 {
            (1.0 - 2.0 * e) / (2.0 * u.sqrt())
        } else if e <= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        let root = if b == 0.0 { 0.0 } else { b * root };
        a * (1.0 - 2.0 * e) + root + c * PI * (PI * e).cos()
    };
    let curv = move |e: f64| {
        let u = e * (1.0 - e);
        2.0 * a + b / (4.0 * u.powf(1.5)) + c * PI * PI * (PI * e).sin()
    };
    ConcaveRiskSpec::new(h, dh).with_curvature(curv)
}

fn coefficients() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..4.0f64, 0.0..2.0f64, 0.0..2.0f64).prop_filter("nonzero", |(a, b, c)| a + b + c > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn savage_round_trip((a, b, c) in coefficients()) {
        let grid = Grid::with_points(65).unwrap();
        let spec = mixture(a, b, c);
        let loss = from_concave_risk("mix", &spec, grid).unwrap();
        for eta in grid.values() {
            let diag = loss.conditional_risk(eta, eta).unwrap().get();
            prop_assert!((diag - spec.bayes_risk(eta)).abs() <= 1e-12, "eta {eta}: {diag}");
        }
        prop_assert!(certify_proper(&loss, grid).passed());
    }

    #[test]
    fn strong_properness_matches_modulus((a, b, c) in coefficients()) {
        let grid = Grid::default();
        let spec = mixture(a, b, c);
        let loss = from_concave_risk("mix", &spec, grid).unwrap();
        let modulus = strong_concavity_modulus(|e| spec.bayes_risk(e), grid);
        for factor in [0.5, 0.97, 1.03, 1.5] {
            let lambda = factor * modulus;
            if lambda <= 0.0 {
                continue;
            }
            let passed = certify_strongly_proper(&loss, lambda, grid).unwrap().passed();
            prop_assert_eq!(passed, modulus >= lambda - 1e-6, "lambda {} modulus {}", lambda, modulus);
        }
    }

    #[test]
    fn ranking_regret_is_invariant_under_increasing_maps(seed in any::<u64>(), index in 0usize..1000, tied in any::<bool>()) {
        let style = if tied { ScoreStyle::Tied } else { ScoreStyle::Continuous };
        let t = random_trial(seed, index, Interval::EXTENDED_LINE, style);
        let base = ranking_regret(&t.distribution, &t.scores).unwrap();
        let affine = t.scores.map_values(|x| 3.0 * x - 1.0);
        let cubed = t.scores.map_values(|x| x * x * x);
        prop_assert!((ranking_regret(&t.distribution, &affine).unwrap() - base).abs() <= 1e-12);
        prop_assert!((ranking_regret(&t.distribution, &cubed).unwrap() - base).abs() <= 1e-12);
        prop_assert!(base >= -1e-12);
    }

    #[test]
    fn misordered_pairs_are_covered_by_estimation_error(seed in any::<u64>(), index in 0usize..1000) {
        let t = random_trial(seed, index, Interval::UNIT, ScoreStyle::Continuous);
        let eta = t.distribution.etas();
        let est = t.scores.aligned(&t.distribution).unwrap();
        for i in 0..eta.len() {
            for j in 0..eta.len() {
                if (est[i] - est[j]) * (eta[i] - eta[j]) <= 0.0 {
                    prop_assert!((eta[i] - eta[j]).abs() <= (est[i] - eta[i]).abs() + (est[j] - eta[j]).abs());
                }
            }
        }
    }

    #[test]
    fn surrogate_regrets_are_nonnegative(seed in any::<u64>(), index in 0usize..1000, k in 0usize..7) {
        let ell = proper_rank::loss::catalog().swap_remove(k);
        let t = random_trial(seed, index, ell.prediction_range(), ScoreStyle::Continuous);
        prop_assert!(surrogate_regret(&t.distribution, &ell, &t.scores).unwrap().regret >= -1e-12);
    }

    #[test]
    fn main_rhs_monotonicity(r in 0.0..10.0f64, dr in 0.001..1.0f64, lambda in 0.1..20.0f64, p in 0.01..0.49f64, dp in 0.001..0.01f64) {
        let base = main_bound_rhs(lambda, p, r).unwrap();
        prop_assert!(main_bound_rhs(lambda, p, r + dr).unwrap() > base);
        if r > 0.0 {
            prop_assert!(main_bound_rhs(lambda * 1.5, p, r).unwrap() < base);
            // p (1 - p) grows as p moves toward 1/2
            prop_assert!(main_bound_rhs(lambda, p + dp, r).unwrap() < base);
        }
    }
}
