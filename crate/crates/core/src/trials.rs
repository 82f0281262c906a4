//! Randomized trials for the bound suites.
//!
//! Trial `k` under root seed `s` draws from a ChaCha8 stream `k` keyed by `s`,
//! so any trial can be replayed alone and results do not depend on thread
//! scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::{
    bartlett_check, check_main_bound, check_main_bound_with_lambda, kotlowski_check, pairwise_balance_check,
    pairwise_identity_check, plugin_bound, regret_identity_check, BoundReport, MarginLoss,
};
use crate::distribution::FiniteDistribution;
use crate::error::Result;
use crate::extended::Interval;
use crate::loss::{self, BinaryLoss};
use crate::scores::ScoringFunction;

/// Posteriors are drawn uniformly from this interval.
pub const ETA_RANGE: (f64, f64) = (0.02, 0.98);

/// Support sizes are drawn uniformly from `2..=MAX_SUPPORT`.
pub const MAX_SUPPORT: usize = 20;

pub fn trial_rng(root_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(trial as u64);
    rng
}

/// `|X|` uniform on `{2, ..., 20}`, flat Dirichlet weights (normalised
/// standard exponentials), `eta` i.i.d. uniform on `[0.02, 0.98]`.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R) -> FiniteDistribution {
    let n = rng.random_range(2..=MAX_SUPPORT);
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let etas: Vec<f64> = (0..n).map(|_| rng.random_range(ETA_RANGE.0..=ETA_RANGE.1)).collect();
    FiniteDistribution::from_arrays(&weights, &etas).expect("generated distribution is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreStyle {
    /// Distinct scores with probability one.
    Continuous,
    /// Normals rounded to the nearest half before mapping into the range,
    /// which produces ties.
    Tied,
}

/// A standard normal per instance, mapped into `range`: unchanged on the
/// extended line, `lo + (hi - lo) Phi(z)` on a bounded range.
pub fn random_scores<R: Rng + ?Sized>(
    rng: &mut R,
    d: &FiniteDistribution,
    range: Interval,
    style: ScoreStyle,
) -> ScoringFunction {
    let normal = Normal::standard();
    let values: Vec<f64> = (0..d.len())
        .map(|_| {
            let mut z: f64 = rng.sample(StandardNormal);
            if style == ScoreStyle::Tied {
                z = (2.0 * z).round() / 2.0;
            }
            if range.is_bounded() {
                range.lo + (range.hi - range.lo) * normal.cdf(z)
            } else if range == Interval::EXTENDED_LINE {
                z
            } else {
                range.clamp(z)
            }
        })
        .collect();
    ScoringFunction::for_distribution(d, &values).expect("one score per instance")
}

#[derive(Clone, Debug)]
pub struct Trial {
    pub seed: u64,
    pub index: usize,
    pub distribution: FiniteDistribution,
    pub scores: ScoringFunction,
}

pub fn random_trial(root_seed: u64, index: usize, range: Interval, style: ScoreStyle) -> Trial {
    let mut rng = trial_rng(root_seed, index);
    let distribution = random_distribution(&mut rng);
    let scores = random_scores(&mut rng, &distribution, range, style);
    Trial {
        seed: root_seed,
        index,
        distribution,
        scores,
    }
}

/// Half-width of the posterior window of [`midpoint_trial`].
pub const MIDPOINT_SPREAD: f64 = 0.05;

/// Three instances with `eta` uniform on `1/2 +- MIDPOINT_SPREAD` and scores
/// `psi(p + 1e-7 k)` for `k` uniform on `{0, 1, 2}`. The scores are close to
/// the best constant, so the surrogate regret is nearly minimal for the
/// ranking they induce, and ties are common.
pub fn midpoint_trial(root_seed: u64, index: usize, ell: &loss::CompositeLoss) -> Trial {
    let mut rng = trial_rng(root_seed, index);
    let raw: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let etas: Vec<f64> = (0..3)
        .map(|_| 0.5 + MIDPOINT_SPREAD * rng.random_range(-1.0..=1.0))
        .collect();
    let distribution = FiniteDistribution::from_arrays(&weights, &etas).expect("generated distribution is valid");
    let p = distribution.positive_rate();
    let values: Vec<f64> = (0..3)
        .map(|_| {
            let q = p + 1e-7 * rng.random_range(0..3) as f64;
            ell.link().forward(q).expect("q lies inside (0, 1)")
        })
        .collect();
    let scores = ScoringFunction::for_distribution(&distribution, &values).expect("one score per instance");
    Trial {
        seed: root_seed,
        index,
        distribution,
        scores,
    }
}

fn main_report(
    d: &FiniteDistribution,
    ell: &loss::CompositeLoss,
    f: &ScoringFunction,
    lambda: Option<f64>,
) -> Result<BoundReport> {
    match lambda {
        Some(l) => check_main_bound_with_lambda(d, ell, f, l),
        None => check_main_bound(d, ell, f),
    }
}

/// A randomized check run once per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum Suite {
    /// The strongly proper bound for a catalog loss. `lambda` overrides the
    /// stored constant.
    Main { loss: String, lambda: Option<f64> },
    /// The plug-in bound with `eta_hat = clamp(eta + 0.3 z, 0, 1)`.
    Plugin,
    /// Direct ranking regret against the Clemencon identity; odd trials use
    /// tied scores.
    RegretIdentity,
    /// Ranking regret against pairwise 0-1 regret for tie-free scores, plus
    /// the balance of the induced distribution.
    PairwiseIdentity,
    Bartlett { loss: MarginLoss },
    Kotlowski { loss: MarginLoss },
    /// The strongly proper bound on three-point distributions with `eta`
    /// near one half and almost constant scores at `psi(p)`, ordered
    /// adversarially. This is where `-H''` is smallest for the catalog
    /// losses, so an overstated `lambda` shows up here first.
    Midpoint { loss: String, lambda: Option<f64> },
}

impl Suite {
    pub fn name(&self) -> String {
        match self {
            Suite::Main { loss, .. } => format!("main-{loss}"),
            Suite::Plugin => "plugin".into(),
            Suite::RegretIdentity => "clemencon-identity".into(),
            Suite::PairwiseIdentity => "pairwise-identity".into(),
            Suite::Bartlett { loss } => format!("bartlett-{}", loss.tag()),
            Suite::Kotlowski { loss } => format!("kotlowski-{}", loss.tag()),
            Suite::Midpoint { loss, .. } => format!("midpoint-{loss}"),
        }
    }

    /// The suites exercised by the bound-check runner for the given losses.
    pub fn standard(losses: &[String], lambda: Option<f64>) -> Vec<Suite> {
        let mut out: Vec<Suite> = losses
            .iter()
            .map(|l| Suite::Main {
                loss: l.clone(),
                lambda,
            })
            .collect();
        out.extend(losses.iter().map(|l| Suite::Midpoint {
            loss: l.clone(),
            lambda,
        }));
        out.extend([Suite::Plugin, Suite::RegretIdentity, Suite::PairwiseIdentity]);
        for loss in MarginLoss::ALL {
            out.push(Suite::Bartlett { loss });
            out.push(Suite::Kotlowski { loss });
        }
        out
    }

    /// The reports of a single trial.
    pub fn run_trial(&self, root_seed: u64, index: usize) -> Result<Vec<BoundReport>> {
        let reports = match self {
            Suite::Main { loss, lambda } => {
                let ell = loss::by_name(loss)?;
                let t = random_trial(root_seed, index, ell.prediction_range(), ScoreStyle::Continuous);
                vec![main_report(&t.distribution, &ell, &t.scores, *lambda)?]
            }
            Suite::Midpoint { loss, lambda } => {
                let ell = loss::by_name(loss)?;
                let t = midpoint_trial(root_seed, index, &ell);
                let mut r = main_report(&t.distribution, &ell, &t.scores, *lambda)?;
                r.bound_name = "main-midpoint".into();
                vec![r]
            }
            Suite::Plugin => {
                let mut rng = trial_rng(root_seed, index);
                let d = random_distribution(&mut rng);
                let est: Vec<f64> = d
                    .etas()
                    .iter()
                    .map(|e| (e + 0.3 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0))
                    .collect();
                vec![plugin_bound(&d, &ScoringFunction::for_distribution(&d, &est)?)?]
            }
            Suite::RegretIdentity => {
                let style = if index % 2 == 1 {
                    ScoreStyle::Tied
                } else {
                    ScoreStyle::Continuous
                };
                let t = random_trial(root_seed, index, Interval::EXTENDED_LINE, style);
                vec![regret_identity_check(&t.distribution, &t.scores)?]
            }
            Suite::PairwiseIdentity => {
                let t = random_trial(root_seed, index, Interval::EXTENDED_LINE, ScoreStyle::Continuous);
                vec![
                    pairwise_identity_check(&t.distribution, &t.scores)?,
                    pairwise_balance_check(&t.distribution),
                ]
            }
            Suite::Bartlett { loss } => {
                let t = random_trial(root_seed, index, Interval::EXTENDED_LINE, ScoreStyle::Continuous);
                vec![bartlett_check(&t.distribution, *loss, &t.scores)?]
            }
            Suite::Kotlowski { loss } => {
                let t = random_trial(root_seed, index, Interval::EXTENDED_LINE, ScoreStyle::Continuous);
                let (a, b) = kotlowski_check(&t.distribution, *loss, &t.scores)?;
                vec![a, b]
            }
        };
        Ok(reports
            .into_iter()
            .map(|r| r.with_seed(root_seed, index))
            .collect())
    }

    /// Runs `trials` trials in parallel; reports come back in trial order.
    pub fn run(&self, root_seed: u64, trials: usize) -> Result<Vec<BoundReport>> {
        let per_trial: Vec<Result<Vec<BoundReport>>> = (0..trials)
            .into_par_iter()
            .map(|i| self.run_trial(root_seed, i))
            .collect();
        let mut out = Vec::with_capacity(trials);
        for r in per_trial {
            out.extend(r?);
        }
        Ok(out)
    }
}

/// Counts and the tightest case of a batch of reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub bound_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    pub count: usize,
    pub violations: usize,
    #[serde(with = "crate::extended::extended_f64")]
    pub min_slack: f64,
    pub argmin: Option<crate::bounds::BoundContext>,
}

/// One summary per distinct `(bound_name, loss)`, in order of first
/// appearance.
pub fn summarize(reports: &[BoundReport]) -> Vec<SuiteSummary> {
    let mut out: Vec<SuiteSummary> = Vec::new();
    for r in reports {
        let found = out
            .iter()
            .position(|s| s.bound_name == r.bound_name && s.loss == r.context.loss);
        let entry = match found {
            Some(i) => &mut out[i],
            None => {
                out.push(SuiteSummary {
                    bound_name: r.bound_name.clone(),
                    loss: r.context.loss.clone(),
                    count: 0,
                    violations: 0,
                    min_slack: f64::INFINITY,
                    argmin: None,
                });
                out.last_mut().expect("just pushed")
            }
        };
        entry.count += 1;
        if !r.holds {
            entry.violations += 1;
        }
        if r.slack < entry.min_slack || entry.argmin.is_none() {
            entry.min_slack = r.slack;
            entry.argmin = Some(r.context.clone());
        }
    }
    out
}
