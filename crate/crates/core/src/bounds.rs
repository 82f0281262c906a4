//! Regret bounds for bipartite ranking, each instantiated as a [`BoundReport`].

use serde::{Deserialize, Serialize};

use crate::distribution::{FiniteDistribution, NoiseCertificate};
use crate::error::{Error, Result};
use crate::extended::extended_f64;
use crate::loss::{self, BinaryLoss, CompositeLoss};
use crate::regret::{
    balanced_surrogate_regret, clemencon_regret, pairwise_surrogate_regret, pairwise_zero_one_regret,
    ranking_error, ranking_regret, surrogate_regret,
};
use crate::scores::ScoringFunction;

/// Slack tolerance for inequalities between exact finite sums.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Slack tolerance for the plug-in bound and for identities.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Where a report came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<usize>,
}

/// One instance of an inequality `lhs <= rhs`. Identities are reported with
/// `lhs = |difference|` and `rhs = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    #[serde(with = "extended_f64")]
    pub lhs: f64,
    #[serde(with = "extended_f64")]
    pub rhs: f64,
    #[serde(with = "extended_f64")]
    pub slack: f64,
    pub holds: bool,
    pub tolerance: f64,
    pub context: BoundContext,
}

impl BoundReport {
    pub fn new(bound_name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64, context: BoundContext) -> Self {
        let slack = if lhs == rhs { 0.0 } else { rhs - lhs };
        Self {
            bound_name: bound_name.into(),
            lhs,
            rhs,
            slack,
            holds: slack >= -tolerance,
            tolerance,
            context,
        }
    }

    fn identity(bound_name: &str, a: f64, b: f64, context: BoundContext) -> Self {
        Self::new(bound_name, (a - b).abs(), 0.0, EXACT_TOLERANCE, context)
    }

    pub fn with_seed(mut self, seed: u64, trial: usize) -> Self {
        self.context.seed = Some(seed);
        self.context.trial = Some(trial);
        self
    }
}

fn context(d: &FiniteDistribution) -> BoundContext {
    BoundContext {
        p: Some(d.positive_rate()),
        ..BoundContext::default()
    }
}

/// `sqrt(2) / (p (1 - p) sqrt(lambda)) * sqrt(regret)`.
pub fn main_bound_rhs(lambda: f64, p: f64, surrogate_regret: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda = {lambda} must be positive and finite")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} must lie in (0, 1)")));
    }
    if !(surrogate_regret >= 0.0) {
        return Err(Error::invalid(format!("surrogate regret {surrogate_regret} is negative")));
    }
    Ok(std::f64::consts::SQRT_2 / (p * (1.0 - p) * lambda.sqrt()) * surrogate_regret.sqrt())
}

/// `regret_rank[f] <= sqrt(2) / (p (1 - p) sqrt(lambda)) sqrt(regret_l[f])`
/// with the loss's stored strong properness constant.
pub fn check_main_bound(d: &FiniteDistribution, ell: &CompositeLoss, f: &ScoringFunction) -> Result<BoundReport> {
    let lambda = ell
        .lambda()
        .ok_or_else(|| Error::MissingCertification(ell.name().to_string()))?;
    check_main_bound_with_lambda(d, ell, f, lambda)
}

/// [`check_main_bound`] with an explicit `lambda`, which need not be valid
/// for `ell`.
pub fn check_main_bound_with_lambda(
    d: &FiniteDistribution,
    ell: &CompositeLoss,
    f: &ScoringFunction,
    lambda: f64,
) -> Result<BoundReport> {
    let lhs = ranking_regret(d, f)?;
    let surrogate = surrogate_regret(d, ell, f)?.regret;
    let rhs = main_bound_rhs(lambda, d.positive_rate(), surrogate.max(0.0))?;
    Ok(BoundReport::new(
        "main",
        lhs,
        rhs,
        BOUND_TOLERANCE,
        BoundContext {
            lambda: Some(lambda),
            loss: Some(ell.name().to_string()),
            ..context(d)
        },
    ))
}

/// `regret_rank[eta_hat] <= E|eta_hat - eta| / (p (1 - p))` for a class
/// probability estimate used as the scoring function.
pub fn plugin_bound(d: &FiniteDistribution, eta_hat: &ScoringFunction) -> Result<BoundReport> {
    let est = eta_hat.aligned(d)?;
    if let Some(bad) = est.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ProbabilityOutOfRange(*bad));
    }
    let lhs = ranking_regret(d, eta_hat)?;
    let p = d.positive_rate();
    let l1: f64 = d
        .instances()
        .iter()
        .zip(&est)
        .map(|(x, e)| x.weight * (e - x.eta).abs())
        .sum();
    Ok(BoundReport::new("plugin", lhs, l1 / (p * (1.0 - p)), EXACT_TOLERANCE, context(d)))
}

/// The two margin losses with known pairwise calibration constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginLoss {
    Exponential,
    Logistic,
}

impl MarginLoss {
    pub const ALL: [MarginLoss; 2] = [MarginLoss::Exponential, MarginLoss::Logistic];

    pub fn loss(self) -> CompositeLoss {
        match self {
            MarginLoss::Exponential => loss::exponential(),
            MarginLoss::Logistic => loss::logistic(),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            MarginLoss::Exponential => "exp",
            MarginLoss::Logistic => "log",
        }
    }

    /// Pairwise regret over balanced regret: 9/4 and 2.
    pub fn balanced_factor(self) -> f64 {
        match self {
            MarginLoss::Exponential => 2.25,
            MarginLoss::Logistic => 2.0,
        }
    }

    /// Ranking regret over the root of the balanced regret: 3/sqrt(2) and 2.
    pub fn end_to_end_factor(self) -> f64 {
        match self {
            MarginLoss::Exponential => 3.0 / std::f64::consts::SQRT_2,
            MarginLoss::Logistic => 2.0,
        }
    }
}

/// `regret_0-1[sign o f_diff] <= sqrt(2 regret_phi[f_diff])` under the
/// induced pairwise distribution.
pub fn bartlett_check(d: &FiniteDistribution, phi: MarginLoss, f: &ScoringFunction) -> Result<BoundReport> {
    let lhs = pairwise_zero_one_regret(d, f)?;
    let z = pairwise_surrogate_regret(d, &phi.loss(), f)?;
    Ok(BoundReport::new(
        format!("bartlett-{}", phi.tag()),
        lhs,
        (2.0 * z.max(0.0)).sqrt(),
        BOUND_TOLERANCE,
        BoundContext {
            loss: Some(phi.tag().to_string()),
            ..context(d)
        },
    ))
}

/// The balanced-loss bounds: pairwise regret of `f_diff` against a multiple
/// of the balanced regret of `f`, and the end-to-end ranking bound.
pub fn kotlowski_check(d: &FiniteDistribution, phi: MarginLoss, f: &ScoringFunction) -> Result<(BoundReport, BoundReport)> {
    let ell = phi.loss();
    let pairwise = pairwise_surrogate_regret(d, &ell, f)?;
    let balanced = balanced_surrogate_regret(d, &ell, f)?.regret.max(0.0);
    let ctx = BoundContext {
        loss: Some(phi.tag().to_string()),
        ..context(d)
    };
    let reduction = BoundReport::new(
        format!("kotlowski-{}", phi.tag()),
        pairwise,
        phi.balanced_factor() * balanced,
        BOUND_TOLERANCE,
        ctx.clone(),
    );
    let end_to_end = BoundReport::new(
        format!("kotlowski-rank-{}", phi.tag()),
        ranking_regret(d, f)?,
        phi.end_to_end_factor() * balanced.sqrt(),
        BOUND_TOLERANCE,
        ctx,
    );
    Ok((reduction, end_to_end))
}

/// `|(er_rank - er*_rank) - clemencon(f)|`, as an identity report.
pub fn regret_identity_check(d: &FiniteDistribution, f: &ScoringFunction) -> Result<BoundReport> {
    let direct = ranking_error(d, f)? - d.bayes_ranking_risk();
    let identity = clemencon_regret(d, f)?;
    Ok(BoundReport::identity("clemencon-identity", direct, identity, context(d)))
}

/// `|regret_rank[f] - regret_0-1[sign o f_diff]|`, as an identity report.
pub fn pairwise_identity_check(d: &FiniteDistribution, f: &ScoringFunction) -> Result<BoundReport> {
    let rank = ranking_regret(d, f)?;
    let pairwise = pairwise_zero_one_regret(d, f)?;
    Ok(BoundReport::identity("pairwise-identity", rank, pairwise, context(d)))
}

/// `|p~ - 1/2|`, as an identity report.
pub fn pairwise_balance_check(d: &FiniteDistribution) -> BoundReport {
    let pw = d.induce_pairwise();
    BoundReport::identity("pairwise-balance", pw.positive_rate(), 0.5, context(d))
}

/// A one-parameter family of plug-in scoring functions `f_t = psi(eta_hat_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFamily {
    /// `eta_hat_t = (1 - t) eta + t / 2`. Order preserving for `t < 1`.
    Shrink,
    /// `eta_hat_t = clamp(eta + t z, 0.001, 0.999)` with fixed standard
    /// normal `z` per instance.
    Noise,
    /// `eta_hat_t = (1 - t) eta + t (1 - eta)`.
    Reverse,
}

impl ScoreFamily {
    pub fn generate(
        self,
        d: &FiniteDistribution,
        ell: &CompositeLoss,
        ts: &[f64],
        seed: u64,
    ) -> Result<Vec<ScoringFunction>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..d.len())
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        ts.iter()
            .map(|&t| {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::invalid(format!("family parameter t = {t} is outside [0, 1]")));
                }
                let values = d
                    .instances()
                    .iter()
                    .zip(&z)
                    .map(|(x, zi)| {
                        let est = match self {
                            ScoreFamily::Shrink => (1.0 - t) * x.eta + 0.5 * t,
                            ScoreFamily::Noise => (x.eta + t * zi).clamp(0.001, 0.999),
                            ScoreFamily::Reverse => (1.0 - t) * x.eta + t * (1.0 - x.eta),
                        };
                        ell.optimal_prediction(est.clamp(0.0, 1.0))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ScoringFunction::for_distribution(d, &values)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    #[serde(with = "extended_f64")]
    pub surrogate_regret: f64,
    pub ranking_regret: f64,
    /// The `alpha = 0` bound at this point.
    pub main_bound: BoundReport,
    /// Whether the point enters the log-log fit.
    pub fitted: bool,
}

/// Exponent diagnostics for the low-noise bound. The constant in that bound
/// is only known to exist, so nothing here is checked against it; the only
/// pass/fail is the `alpha = 0` bound at every point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowNoiseDiagnostic {
    pub loss: String,
    pub alpha: f64,
    pub certificate: NoiseCertificate,
    /// `(1 + alpha) / (2 + alpha)`.
    pub target_exponent: f64,
    /// Least-squares slope of `ln regret_rank` against `ln regret_l`.
    pub fitted_slope: Option<f64>,
    pub points: Vec<SweepPoint>,
    pub notes: Vec<String>,
}

impl LowNoiseDiagnostic {
    pub fn all_hold(&self) -> bool {
        self.points.iter().all(|p| p.main_bound.holds)
    }
}

pub fn low_noise_diagnostic(
    d: &FiniteDistribution,
    ell: &CompositeLoss,
    family: &[ScoringFunction],
    alpha: f64,
    t_grid: &[f64],
) -> Result<LowNoiseDiagnostic> {
    if family.is_empty() {
        return Err(Error::invalid("the scoring family is empty"));
    }
    let certificate = d.noise_certificate(alpha, t_grid)?;
    let mut notes = Vec::new();
    let mut points = Vec::with_capacity(family.len());
    for (index, f) in family.iter().enumerate() {
        let main_bound = check_main_bound(d, ell, f)?;
        let surrogate = surrogate_regret(d, ell, f)?.regret;
        let rank = main_bound.lhs;
        let usable = |v: f64| v > 0.0 && v.is_finite();
        let fitted = usable(surrogate) && usable(rank);
        if !fitted {
            notes.push(format!(
                "point {index} excluded from the fit (surrogate regret {surrogate}, ranking regret {rank})"
            ));
        }
        points.push(SweepPoint {
            index,
            surrogate_regret: surrogate,
            ranking_regret: rank,
            main_bound,
            fitted,
        });
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.fitted)
        .map(|p| (p.surrogate_regret.ln(), p.ranking_regret.ln()))
        .collect();
    let fitted_slope = least_squares_slope(&xy);
    if fitted_slope.is_none() {
        notes.push("fewer than two distinct usable points; no slope fitted".to_string());
    }
    notes.push(format!(
        "NA(alpha) certificate holds only for t in [{}, {}]",
        certificate.t_min, certificate.t_max
    ));
    Ok(LowNoiseDiagnostic {
        loss: ell.name().to_string(),
        alpha,
        certificate,
        target_exponent: (1.0 + alpha) / (2.0 + alpha),
        fitted_slope,
        points,
        notes,
    })
}

fn least_squares_slope(xy: &[(f64, f64)]) -> Option<f64> {
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
