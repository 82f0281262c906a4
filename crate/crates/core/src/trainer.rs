//! Tabular gradient descent on surrogate risks.
//!
//! Each instance carries its own free score, so the minimiser of the exact
//! surrogate risk is the plug-in `psi(eta)`. Steps are preconditioned by the
//! instance mass: the update for instance `i` is
//! `f_i <- f_i - lr * (eta_hat_i - eta_i) w(eta_hat_i) / psi'(eta_hat_i)`,
//! which is the risk gradient divided by `mu_i`. Without it, instances with
//! small mass would converge at a rate proportional to their mass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::main_bound_rhs;
use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Label};
use crate::loss::{self, BinaryLoss, CompositeLoss, DERIVATIVE_CLAMP};
use crate::regret::{ranking_regret, surrogate_regret};
use crate::scores::ScoringFunction;

/// Maximum number of step halvings per iteration.
pub const MAX_HALVINGS: usize = 30;

/// Exact-mode divergence threshold relative to the initial regret.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainMode {
    /// Minimise `sum_i mu_i L(eta_i, f_i)`.
    #[default]
    Exact,
    /// Minimise the average loss over `n` draws from the distribution.
    Sampled { n: usize, seed: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Zeros,
    /// `psi(1/2)` everywhere.
    LinkOfHalf,
    Custom(ScoringFunction),
}

fn default_record_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: String,
    pub steps: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub mode: TrainMode,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl TrainConfig {
    pub fn new(loss: impl Into<String>, steps: usize, learning_rate: f64) -> Self {
        Self {
            loss: loss.into(),
            steps,
            learning_rate,
            mode: TrainMode::Exact,
            init: Init::Zeros,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if let TrainMode::Sampled { n: 0, .. } = self.mode {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    #[serde(with = "crate::extended::extended_f64")]
    pub surrogate_regret: f64,
    pub ranking_regret: f64,
    /// Right side of the strongly proper bound, when the loss has a constant.
    pub bound_rhs: Option<f64>,
    pub learning_rate: f64,
    pub scores: ScoringFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub loss: String,
    pub checkpoints: Vec<Checkpoint>,
}

impl Trajectory {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("a trajectory has at least one checkpoint")
    }
}

/// Per-instance objective weights and targets.
struct Targets {
    weight: Vec<f64>,
    eta: Vec<f64>,
}

fn targets(d: &FiniteDistribution, mode: &TrainMode) -> Result<Targets> {
    match mode {
        TrainMode::Exact => Ok(Targets {
            weight: d.weights(),
            eta: d.etas(),
        }),
        TrainMode::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let draws = d.sample_indices(*n, &mut rng)?;
            let mut count = vec![0usize; d.len()];
            let mut pos = vec![0usize; d.len()];
            for (i, y) in draws {
                count[i] += 1;
                if y == Label::Positive {
                    pos[i] += 1;
                }
            }
            Ok(Targets {
                weight: count.iter().map(|&c| c as f64 / *n as f64).collect(),
                eta: count
                    .iter()
                    .zip(&pos)
                    .map(|(&c, &p)| if c == 0 { 0.5 } else { p as f64 / c as f64 })
                    .collect(),
            })
        }
    }
}

fn objective(ell: &CompositeLoss, t: &Targets, f: &[f64]) -> Result<f64> {
    let mut total = ExtendedReal::ZERO;
    for ((&w, &eta), &s) in t.weight.iter().zip(&t.eta).zip(f) {
        if w > 0.0 {
            total = total + ell.conditional_risk(eta, s)?.scale(w);
        }
    }
    Ok(total.get())
}

/// `(eta_hat - eta) w(eta_hat) / psi'(eta_hat)`, the derivative of
/// `L(eta, .)` at `y_hat`. Defined on the closed range so that clamped
/// scores can move back inside.
fn risk_slope(ell: &CompositeLoss, eta: f64, prediction: f64) -> Result<f64> {
    let q = ell.plugin(prediction)?.clamp(DERIVATIVE_CLAMP, 1.0 - DERIVATIVE_CLAMP);
    let not_diff = |reason| Error::NotDifferentiable {
        loss: ell.name().to_string(),
        prediction,
        reason,
    };
    let w = ell
        .proper()
        .curvature(q)
        .ok_or_else(|| not_diff("proper loss has no curvature function"))?;
    let slope = ell
        .link()
        .derivative(q)
        .ok_or_else(|| not_diff("link has no derivative"))?;
    let g = (q - eta) * w / slope;
    if g.is_finite() {
        Ok(g)
    } else {
        Err(not_diff("derivative is not finite"))
    }
}

fn initial_scores(d: &FiniteDistribution, ell: &CompositeLoss, init: &Init) -> Result<Vec<f64>> {
    let values = match init {
        Init::Zeros => vec![0.0; d.len()],
        Init::LinkOfHalf => vec![ell.optimal_prediction(0.5)?; d.len()],
        Init::Custom(f) => f.aligned(d)?,
    };
    let range = ell.prediction_range();
    for &v in &values {
        if !v.is_finite() || !range.contains(v) {
            return Err(Error::PredictionOutOfRange {
                loss: ell.name().to_string(),
                prediction: v,
                range,
            });
        }
    }
    Ok(values)
}

fn checkpoint(
    d: &FiniteDistribution,
    ell: &CompositeLoss,
    step: usize,
    lr: f64,
    f: &[f64],
) -> Result<Checkpoint> {
    let scores = ScoringFunction::for_distribution(d, f)?;
    let surrogate = surrogate_regret(d, ell, &scores)?.regret;
    let bound_rhs = match ell.lambda() {
        Some(l) if surrogate.is_finite() => Some(main_bound_rhs(l, d.positive_rate(), surrogate.max(0.0))?),
        _ => None,
    };
    Ok(Checkpoint {
        step,
        surrogate_regret: surrogate,
        ranking_regret: ranking_regret(d, &scores)?,
        bound_rhs,
        learning_rate: lr,
        scores,
    })
}

/// Gradient descent with projection onto the prediction range and
/// backtracking: a step that increases the objective is halved, up to
/// [`MAX_HALVINGS`] times, and the reduced rate is kept. If every halving
/// still increases the objective the scores stay put for that step.
///
/// Checkpoints are taken at step 0, every `record_every` steps, and at the
/// last step. In exact mode a surrogate regret above ten times the initial
/// one is reported as [`Error::Diverged`]; sampled mode may legitimately
/// move away from the population optimum and only fails on a non-finite
/// objective.
pub fn fit_scores(d: &FiniteDistribution, ell: &CompositeLoss, cfg: &TrainConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let range = ell.prediction_range();
    let t = targets(d, &cfg.mode)?;
    let mut f = initial_scores(d, ell, &cfg.init)?;
    let mut lr = cfg.learning_rate;
    let mut obj = objective(ell, &t, &f)?;
    if !obj.is_finite() {
        return Err(Error::invalid("the initial surrogate risk is infinite"));
    }
    let mut trajectory = Trajectory {
        loss: ell.name().to_string(),
        checkpoints: vec![checkpoint(d, ell, 0, lr, &f)?],
    };
    let initial = trajectory.checkpoints[0].surrogate_regret;
    let exact = cfg.mode == TrainMode::Exact;

    for step in 1..=cfg.steps {
        let direction = t
            .weight
            .iter()
            .zip(&t.eta)
            .zip(&f)
            .map(|((&w, &eta), &s)| if w > 0.0 { risk_slope(ell, eta, s) } else { Ok(0.0) })
            .collect::<Result<Vec<_>>>()?;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = f
                .iter()
                .zip(&direction)
                .map(|(s, g)| range.clamp(s - lr * g))
                .collect();
            let value = objective(ell, &t, &candidate)?;
            if value <= obj {
                f = candidate;
                obj = value;
                break;
            }
            lr *= 0.5;
        }
        if !obj.is_finite() {
            let regret = surrogate_regret(d, ell, &ScoringFunction::for_distribution(d, &f)?)?.regret;
            return Err(Error::Diverged {
                step,
                regret,
                initial,
                trajectory: Box::new(trajectory),
            });
        }
        let record = step % cfg.record_every == 0 || step == cfg.steps;
        let diverge_check = exact && initial > 1e-12;
        if record || diverge_check {
            let cp = checkpoint(d, ell, step, lr, &f)?;
            if diverge_check && cp.surrogate_regret > DIVERGENCE_FACTOR * initial {
                let regret = cp.surrogate_regret;
                trajectory.checkpoints.push(cp);
                return Err(Error::Diverged {
                    step,
                    regret,
                    initial,
                    trajectory: Box::new(trajectory),
                });
            }
            if record {
                trajectory.checkpoints.push(cp);
            }
        }
    }
    Ok(trajectory)
}

/// `psi^{-1}` applied to every score.
pub fn plugin_from_scores(ell: &CompositeLoss, f: &ScoringFunction) -> Result<ScoringFunction> {
    let pairs = f
        .iter()
        .map(|(id, s)| Ok((id.to_string(), ell.plugin(s)?)))
        .collect::<Result<Vec<_>>>()?;
    ScoringFunction::from_pairs(pairs)
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub loss: String,
    pub max_relative_error: f64,
    pub checked: usize,
    /// Points within `10 h` of the range boundary, which are skipped.
    pub excluded: usize,
}

/// Compares [`CompositeLoss::gradient`] with
/// `(l(y, y_hat + h) - l(y, y_hat - h)) / 2h`. The relative error is taken
/// against the larger of the two magnitudes.
pub fn gradient_check(ell: &CompositeLoss, points: &[(Label, f64)], h: f64) -> Result<GradientCheck> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step h = {h} must be positive")));
    }
    let range = ell.prediction_range();
    let mut out = GradientCheck {
        loss: ell.name().to_string(),
        max_relative_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    for &(label, y) in points {
        if !range.contains(y) {
            return Err(Error::PredictionOutOfRange {
                loss: ell.name().to_string(),
                prediction: y,
                range,
            });
        }
        if !y.is_finite() || y - range.lo < 10.0 * h || range.hi - y < 10.0 * h {
            out.excluded += 1;
            continue;
        }
        let analytic = ell.gradient(label, y)?;
        let numeric = (ell.evaluate(label, y + h)?.get() - ell.evaluate(label, y - h)?.get()) / (2.0 * h);
        let scale = analytic.abs().max(numeric.abs()).max(f64::MIN_POSITIVE);
        out.max_relative_error = out.max_relative_error.max((analytic - numeric).abs() / scale);
        out.checked += 1;
    }
    Ok(out)
}

/// Trains by loss name; see [`fit_scores`].
pub fn fit_by_name(d: &FiniteDistribution, cfg: &TrainConfig) -> Result<Trajectory> {
    fit_scores(d, &loss::by_name(&cfg.loss)?, cfg)
}
