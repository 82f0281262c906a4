//! Exact regret oracles on finite distributions.
//!
//! All pair sums run over ordered pairs `(i, j)` in row-major order, so every
//! result is bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::extended::{extended_f64, ExtendedReal, Label};
use crate::loss::{BinaryLoss, CompositeLoss};
use crate::scores::ScoringFunction;

/// Agreement required between independent routes to the same regret.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretMethod {
    Direct,
    ClemenconIdentity,
    Pairwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    #[serde(with = "extended_f64")]
    pub risk: f64,
    pub optimal_risk: f64,
    #[serde(with = "extended_f64")]
    pub regret: f64,
    pub method: RegretMethod,
}

fn pair_sum(n: usize, mut term: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += term(i, j);
        }
        total += row;
    }
    total
}

/// `P(f(X) < f(X') | Y = 1, Y' = -1)` with ties counted as one half.
pub fn ranking_error(d: &FiniteDistribution, f: &ScoringFunction) -> Result<f64> {
    let s = f.aligned(d)?;
    let inst = d.instances();
    let total = pair_sum(d.len(), |i, j| {
        let (a, b) = (&inst[i], &inst[j]);
        let ab = a.eta * (1.0 - b.eta);
        let ba = (1.0 - a.eta) * b.eta;
        let mass = a.weight * b.weight;
        if s[i] < s[j] {
            mass * ab
        } else if s[i] > s[j] {
            mass * ba
        } else {
            mass * 0.5 * (ab + ba)
        }
    });
    Ok(total / d.cross_label_mass())
}

/// `(1 / 2p(1-p)) sum_{i,j} mu_i mu_j |eta_i - eta_j| ([(f_i - f_j)(eta_i - eta_j) < 0] + [f_i = f_j] / 2)`.
pub fn clemencon_regret(d: &FiniteDistribution, f: &ScoringFunction) -> Result<f64> {
    let s = f.aligned(d)?;
    let inst = d.instances();
    let total = pair_sum(d.len(), |i, j| {
        let (a, b) = (&inst[i], &inst[j]);
        let gap = a.eta - b.eta;
        let indicator = if s[i] == s[j] {
            0.5
        } else if (s[i] < s[j]) == (gap > 0.0) && gap != 0.0 {
            1.0
        } else {
            0.0
        };
        a.weight * b.weight * gap.abs() * indicator
    });
    Ok(total / d.cross_label_mass())
}

/// Ranking regret, computed both as `er_rank - er*_rank` and through the
/// Clemencon identity. A disagreement beyond [`IDENTITY_TOLERANCE`] is a bug
/// and is reported as [`Error::InvariantViolation`].
pub fn ranking_regret(d: &FiniteDistribution, f: &ScoringFunction) -> Result<f64> {
    Ok(ranking_regret_report(d, f)?.regret)
}

pub fn ranking_regret_report(d: &FiniteDistribution, f: &ScoringFunction) -> Result<RegretReport> {
    let risk = ranking_error(d, f)?;
    let optimal = d.bayes_ranking_risk();
    let identity = clemencon_regret(d, f)?;
    let direct = risk - optimal;
    if (direct - identity).abs() > IDENTITY_TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "ranking regret {direct} (direct) disagrees with {identity} (Clemencon identity)"
        )));
    }
    Ok(RegretReport {
        risk,
        optimal_risk: optimal,
        regret: identity,
        method: RegretMethod::ClemenconIdentity,
    })
}

/// `er_l[f] - er*_l = sum_i mu_i (L(eta_i, f_i) - H(eta_i))`.
pub fn surrogate_regret<L: BinaryLoss + ?Sized>(
    d: &FiniteDistribution,
    ell: &L,
    f: &ScoringFunction,
) -> Result<RegretReport> {
    let s = f.aligned(d)?;
    let mut risk = ExtendedReal::ZERO;
    let mut optimal = 0.0;
    let mut regret = ExtendedReal::ZERO;
    for (inst, &score) in d.instances().iter().zip(&s) {
        risk = risk + ell.conditional_risk(inst.eta, score)?.scale(inst.weight);
        optimal += inst.weight * ell.bayes_risk(inst.eta);
        regret = regret + ell.conditional_regret(inst.eta, score)?.scale(inst.weight);
    }
    Ok(RegretReport {
        risk: risk.get(),
        optimal_risk: optimal,
        regret: regret.get(),
        method: RegretMethod::Direct,
    })
}

/// 0-1 regret of the pairwise classifier `sign(f_i - f_j)` under the induced
/// pairwise distribution, with `sign(0) = -1`.
///
/// Equals [`ranking_regret`] for tie-free `f`. With ties the classifier pays
/// full error on each tied pair where the ranking error pays one half, and
/// the two quantities still agree because the induced weights of `(i, j)` and
/// `(j, i)` coincide: the tied pair is right in one orientation and wrong in
/// the other.
pub fn pairwise_zero_one_regret(d: &FiniteDistribution, f: &ScoringFunction) -> Result<f64> {
    let s = f.aligned(d)?;
    let pw = d.induce_pairwise();
    let mut regret = 0.0;
    for pair in pw.pairs() {
        let error = if s[pair.first] > s[pair.second] {
            1.0 - pair.eta
        } else {
            pair.eta
        };
        regret += pair.weight * (error - pair.eta.min(1.0 - pair.eta));
    }
    Ok(regret)
}

/// The difference `f_i - f_j` on the extended line, with equal scores
/// (including equal infinities) giving zero.
pub fn score_difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// `sum_{(i,j)} w_ij (L_phi(eta~_ij, f_i - f_j) - H_phi(eta~_ij))` for a margin
/// loss `phi` defined on the whole extended line.
pub fn pairwise_surrogate_regret(d: &FiniteDistribution, phi: &CompositeLoss, f: &ScoringFunction) -> Result<f64> {
    let range = phi.prediction_range();
    if range.lo != f64::NEG_INFINITY || range.hi != f64::INFINITY {
        return Err(Error::invalid(format!(
            "pairwise regret needs a loss on the extended line; `{}` has range {range}",
            phi.name()
        )));
    }
    let s = f.aligned(d)?;
    let pw = d.induce_pairwise();
    let mut total = ExtendedReal::ZERO;
    for pair in pw.pairs() {
        let diff = score_difference(s[pair.first], s[pair.second]);
        total = total + phi.conditional_regret(pair.eta, diff)?.scale(pair.weight);
    }
    Ok(total.get())
}

/// Class weights `(1/(2p), 1/(2(1-p)))` of the balanced loss.
pub fn balancing_weights(d: &FiniteDistribution) -> (f64, f64) {
    let p = d.positive_rate();
    (0.5 / p, 0.5 / (1.0 - p))
}

/// Regret of `f` under the balanced loss
/// `l_bal(y, y_hat) = l(1, y_hat) [y = 1] / (2p) + l(-1, y_hat) [y = -1] / (2(1-p))`.
///
/// With `a = eta / (2p)` and `b = (1 - eta) / (2(1-p))` the balanced
/// conditional risk is `(a + b) L(a / (a + b), y_hat)`, so for a proper
/// composite loss its infimum is exactly `(a + b) H(a / (a + b))`.
pub fn balanced_surrogate_regret(d: &FiniteDistribution, ell: &CompositeLoss, f: &ScoringFunction) -> Result<RegretReport> {
    let s = f.aligned(d)?;
    let (wp, wn) = balancing_weights(d);
    let mut risk = ExtendedReal::ZERO;
    let mut optimal = 0.0;
    let mut regret = ExtendedReal::ZERO;
    for (inst, &score) in d.instances().iter().zip(&s) {
        let a = inst.eta * wp;
        let b = (1.0 - inst.eta) * wn;
        let mass = a + b;
        let tilted = (a / mass).clamp(0.0, 1.0);
        let pos = ell.loss(Label::Positive, score)?;
        let neg = ell.loss(Label::Negative, score)?;
        let r = pos.scale(a) + neg.scale(b);
        risk = risk + r.scale(inst.weight);
        optimal += inst.weight * mass * ell.bayes_risk(tilted);
        regret = regret + ell.conditional_regret(tilted, score)?.scale(inst.weight * mass);
    }
    Ok(RegretReport {
        risk: risk.get(),
        optimal_risk: optimal,
        regret: regret.get(),
        method: RegretMethod::Direct,
    })
}

/// The scores minimising the balanced risk: `psi(a / (a + b))` per instance.
pub fn balanced_optimal_scores(d: &FiniteDistribution, ell: &CompositeLoss) -> Result<ScoringFunction> {
    let (wp, wn) = balancing_weights(d);
    let values = d
        .instances()
        .iter()
        .map(|inst| {
            let a = inst.eta * wp;
            let b = (1.0 - inst.eta) * wn;
            ell.optimal_prediction((a / (a + b)).clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    ScoringFunction::for_distribution(d, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{catalog, exponential, logistic, squared};
    use approx::assert_relative_eq;

    fn two_point() -> FiniteDistribution {
        FiniteDistribution::from_arrays(&[0.5, 0.5], &[0.8, 0.2]).unwrap()
    }

    fn scores(d: &FiniteDistribution, v: &[f64]) -> ScoringFunction {
        ScoringFunction::for_distribution(d, v).unwrap()
    }

    #[test]
    fn ranking_error_examples() {
        let d = two_point();
        assert_relative_eq!(ranking_error(&d, &scores(&d, &[1.0, 0.0])).unwrap(), 0.2, epsilon = 1e-15);
        assert_relative_eq!(ranking_error(&d, &scores(&d, &[0.0, 1.0])).unwrap(), 0.8, epsilon = 1e-15);
        assert_relative_eq!(ranking_error(&d, &scores(&d, &[3.0, 3.0])).unwrap(), 0.5, epsilon = 1e-15);
        let missing = ScoringFunction::from_pairs([("x0", 1.0)]).unwrap();
        assert!(matches!(ranking_error(&d, &missing), Err(Error::MissingScore(_))));
    }

    #[test]
    fn ranking_regret_examples() {
        let d = two_point();
        assert_relative_eq!(ranking_regret(&d, &scores(&d, &[0.0, 1.0])).unwrap(), 0.6, epsilon = 1e-15);
        assert_relative_eq!(ranking_regret(&d, &scores(&d, &[0.8, 0.2])).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ranking_regret(&d, &scores(&d, &[7.0, 7.0])).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn infinite_scores_order_and_tie() {
        let d = two_point();
        let f = scores(&d, &[f64::INFINITY, f64::NEG_INFINITY]);
        assert_eq!(ranking_regret(&d, &f).unwrap(), 0.0);
        let tied = scores(&d, &[f64::INFINITY, f64::INFINITY]);
        assert_relative_eq!(ranking_regret(&d, &tied).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn surrogate_regret_examples() {
        let d = two_point();
        for ell in catalog() {
            let f = d.etas().iter().map(|&e| ell.optimal_prediction(e).unwrap()).collect::<Vec<_>>();
            let r = surrogate_regret(&d, &ell, &scores(&d, &f)).unwrap();
            assert!(r.regret.abs() < 1e-14, "{}", ell.name());
        }
        let r = surrogate_regret(&d, &squared(), &scores(&d, &[0.4, -0.4])).unwrap();
        assert_relative_eq!(r.regret, 0.04, epsilon = 1e-14);

        let r = surrogate_regret(&d, &logistic(), &scores(&d, &[0.0, 0.0])).unwrap();
        let h = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
        assert_relative_eq!(r.regret, std::f64::consts::LN_2 - h, epsilon = 1e-14);
        assert_relative_eq!(r.regret, 0.192745, epsilon = 1e-6);
        assert_relative_eq!(r.risk - r.optimal_risk, r.regret, epsilon = 1e-14);
    }

    #[test]
    fn infinite_surrogate_risk() {
        let d = two_point();
        let r = surrogate_regret(&d, &exponential(), &scores(&d, &[f64::NEG_INFINITY, 0.0])).unwrap();
        assert_eq!(r.risk, f64::INFINITY);
        assert!(r.optimal_risk.is_finite());
        assert_eq!(r.regret, f64::INFINITY);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#""risk":"inf""#));
    }

    #[test]
    fn pairwise_zero_one_examples() {
        let d = two_point();
        let tie_free = scores(&d, &[0.0, 1.0]);
        assert_relative_eq!(
            pairwise_zero_one_regret(&d, &tie_free).unwrap(),
            ranking_regret(&d, &tie_free).unwrap(),
            epsilon = 1e-12
        );
        assert_eq!(pairwise_zero_one_regret(&d, &scores(&d, &[0.8, 0.2])).unwrap(), 0.0);

        // all tied: every pair is classified -1
        let flat = scores(&d, &[1.0, 1.0]);
        let pw = d.induce_pairwise();
        let by_hand: f64 = pw
            .pairs()
            .iter()
            .map(|p| p.weight * (p.eta - p.eta.min(1.0 - p.eta)))
            .sum();
        assert_relative_eq!(pairwise_zero_one_regret(&d, &flat).unwrap(), by_hand, epsilon = 1e-15);
    }

    #[test]
    fn pairwise_surrogate_examples() {
        let d = FiniteDistribution::from_arrays(&[0.2, 0.3, 0.5], &[0.9, 0.4, 0.15]).unwrap();
        let phi = exponential();
        let zero = scores(&d, &[0.0, 0.0, 0.0]);
        let by_hand: f64 = d
            .induce_pairwise()
            .pairs()
            .iter()
            .map(|p| p.weight * (1.0 - 2.0 * (p.eta * (1.0 - p.eta)).sqrt()))
            .sum();
        assert_relative_eq!(pairwise_surrogate_regret(&d, &phi, &zero).unwrap(), by_hand, epsilon = 1e-14);

        let f: Vec<f64> = d.etas().iter().map(|&e| 0.5 * (e / (1.0 - e)).ln()).collect();
        let r = pairwise_surrogate_regret(&d, &phi, &scores(&d, &f)).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
        assert!(pairwise_surrogate_regret(&d, &squared(), &zero).is_err());
    }

    /// Golden-section search for `inf_q (a c(1, q) + b c(-1, q))` after a
    /// 1025-point scan, independent of the closed form used by the library.
    fn balanced_optimum_by_search(ell: &CompositeLoss, a: f64, b: f64) -> f64 {
        let c = ell.proper();
        let obj = |q: f64| {
            let pos = c.partial(Label::Positive, q).unwrap();
            let neg = c.partial(Label::Negative, q).unwrap();
            (pos.scale(a) + neg.scale(b)).get()
        };
        let n = 1024;
        let k = (0..=n)
            .min_by(|&x, &y| obj(x as f64 / n as f64).total_cmp(&obj(y as f64 / n as f64)))
            .unwrap();
        let (mut lo, mut hi) = (
            (k.max(1) - 1) as f64 / n as f64,
            ((k + 1).min(n)) as f64 / n as f64,
        );
        let lo0 = lo.max(1e-15);
        let hi0 = hi.min(1.0 - 1e-15);
        lo = lo0;
        hi = hi0;
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if obj(x1) < obj(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        obj(0.5 * (lo + hi)).min(obj(k as f64 / n as f64))
    }

    #[test]
    fn balanced_optimum_matches_search() {
        let d = FiniteDistribution::from_arrays(&[0.7, 0.3], &[0.9, 0.1]).unwrap();
        let (wp, wn) = balancing_weights(&d);
        for ell in [exponential(), logistic(), squared()] {
            let opt = balanced_optimal_scores(&d, &ell).unwrap();
            let report = balanced_surrogate_regret(&d, &ell, &opt).unwrap();
            assert!(report.regret.abs() < 1e-14);
            let searched: f64 = d
                .instances()
                .iter()
                .map(|x| x.weight * balanced_optimum_by_search(&ell, x.eta * wp, (1.0 - x.eta) * wn))
                .sum();
            assert!(
                (searched - report.optimal_risk).abs() < 1e-9,
                "{}: {searched} vs {}",
                ell.name(),
                report.optimal_risk
            );
        }
    }

    #[test]
    fn balanced_equals_plain_when_classes_are_even() {
        let d = two_point();
        for ell in catalog() {
            let range = ell.prediction_range();
            let f = scores(&d, &[range.clamp(0.3), range.clamp(-0.7)]);
            let plain = surrogate_regret(&d, &ell, &f).unwrap();
            let bal = balanced_surrogate_regret(&d, &ell, &f).unwrap();
            assert!((plain.regret - bal.regret).abs() < 1e-14, "{}", ell.name());
        }
    }
}
