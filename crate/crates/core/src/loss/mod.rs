//! Binary class probability estimation losses.
//!
//! A [`ProperLoss`] `c(y, eta_hat)` scores a probability estimate in `[0, 1]`.
//! A [`Link`] `psi` maps probabilities to a prediction range, and a
//! [`CompositeLoss`] evaluates `l(y, y_hat) = c(y, psi^{-1}(y_hat))`.
//! Everything that can be scored against a class probability implements
//! [`BinaryLoss`], which supplies the conditional risk `L(eta, y_hat)`, the
//! conditional Bayes risk `H(eta)`, and the conditional regret `L - H`.

mod catalog;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Interval, Label};
use crate::scores::ScoringFunction;

pub use catalog::*;

/// A scalar function shared between threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Inverse links are clamped to `[EPS, 1 - EPS]` before derivatives are
/// taken. Risk values never see this clamp.
pub const DERIVATIVE_CLAMP: f64 = 1e-15;

/// Regrets in `(-ROUNDING_FLOOR, 0)` are rounding noise and reported as zero.
const ROUNDING_FLOOR: f64 = 1e-12;

pub(crate) fn check_probability(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(eta))
    }
}

fn to_extended(value: f64, what: &str) -> Result<ExtendedReal> {
    ExtendedReal::new(value).ok_or_else(|| Error::invalid(format!("{what} evaluated to NaN")))
}

/// Shared surface of proper and composite losses.
pub trait BinaryLoss {
    fn name(&self) -> &str;

    /// The set of admissible predictions.
    fn prediction_range(&self) -> Interval;

    /// `l(y, prediction)`.
    fn loss(&self, label: Label, prediction: f64) -> Result<ExtendedReal>;

    /// Conditional Bayes risk `H(eta)`, the infimum of the conditional risk.
    fn bayes_risk(&self, eta: f64) -> f64;

    /// `eta * l(1, y_hat) + (1 - eta) * l(-1, y_hat)`, with `0 * inf = 0`.
    fn conditional_risk(&self, eta: f64, prediction: f64) -> Result<ExtendedReal> {
        check_probability(eta)?;
        let pos = self.loss(Label::Positive, prediction)?;
        let neg = self.loss(Label::Negative, prediction)?;
        Ok(pos.scale(eta) + neg.scale(1.0 - eta))
    }

    /// `L(eta, y_hat) - H(eta)`.
    fn conditional_regret(&self, eta: f64, prediction: f64) -> Result<ExtendedReal> {
        let risk = self.conditional_risk(eta, prediction)?;
        let regret = risk.minus(self.bayes_risk(eta));
        if regret.get() < 0.0 && regret.get() > -ROUNDING_FLOOR {
            Ok(ExtendedReal::ZERO)
        } else {
            Ok(regret)
        }
    }
}

/// A binary CPE loss together with its conditional Bayes risk.
///
/// The partial losses may return `f64::INFINITY`. `superderivative` is one
/// fixed choice of superderivative of `H`; for a proper loss it equals
/// `c(1, .) - c(-1, .)`. `curvature` is `-H''` where it exists and is only
/// used for analytic gradients.
#[derive(Clone)]
pub struct ProperLoss {
    name: String,
    partial_pos: ScalarFn,
    partial_neg: ScalarFn,
    bayes_risk: ScalarFn,
    superderivative: ScalarFn,
    curvature: Option<ScalarFn>,
    strong_properness: Option<f64>,
}

impl ProperLoss {
    pub fn new(
        name: impl Into<String>,
        partial_pos: impl Fn(f64) -> f64 + Send + Sync + 'static,
        partial_neg: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bayes_risk: impl Fn(f64) -> f64 + Send + Sync + 'static,
        superderivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            partial_pos: Arc::new(partial_pos),
            partial_neg: Arc::new(partial_neg),
            bayes_risk: Arc::new(bayes_risk),
            superderivative: Arc::new(superderivative),
            curvature: None,
            strong_properness: None,
        }
    }

    /// Builds a loss from its two partial losses alone.
    ///
    /// The Bayes risk is the infimum of `L(eta, .)` over a 1025-point grid
    /// plus the diagonal point, and the superderivative is
    /// `c(1, .) - c(-1, .)`. Neither is exact for an improper loss, which is
    /// precisely what certification is meant to expose.
    pub fn from_partials(
        name: impl Into<String>,
        partial_pos: impl Fn(f64) -> f64 + Send + Sync + 'static,
        partial_neg: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let pos: ScalarFn = Arc::new(partial_pos);
        let neg: ScalarFn = Arc::new(partial_neg);
        let (p1, n1) = (pos.clone(), neg.clone());
        let (p2, n2) = (pos.clone(), neg.clone());
        let risk_at = move |eta: f64, eta_hat: f64| -> f64 {
            let a = ExtendedReal::new(p1(eta_hat)).unwrap_or(ExtendedReal::INFINITY);
            let b = ExtendedReal::new(n1(eta_hat)).unwrap_or(ExtendedReal::INFINITY);
            (a.scale(eta) + b.scale(1.0 - eta)).get()
        };
        let bayes = move |eta: f64| -> f64 {
            let n = 1024;
            (0..=n)
                .map(|k| risk_at(eta, k as f64 / n as f64))
                .fold(risk_at(eta, eta), f64::min)
        };
        Self {
            name: name.into(),
            partial_pos: pos,
            partial_neg: neg,
            bayes_risk: Arc::new(bayes),
            superderivative: Arc::new(move |e| p2(e) - n2(e)),
            curvature: None,
            strong_properness: None,
        }
    }

    /// Attaches `-H''`, enabling analytic gradients of composites built on
    /// this loss.
    pub fn with_curvature(mut self, curvature: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.curvature = Some(Arc::new(curvature));
        self
    }

    /// Records a claimed strong properness constant. Certification is separate.
    pub fn with_strong_properness(mut self, lambda: f64) -> Self {
        self.strong_properness = Some(lambda);
        self
    }

    pub fn without_strong_properness(mut self) -> Self {
        self.strong_properness = None;
        self
    }

    pub fn strong_properness(&self) -> Option<f64> {
        self.strong_properness
    }

    /// `c(y, eta_hat)`.
    pub fn partial(&self, label: Label, eta_hat: f64) -> Result<ExtendedReal> {
        check_probability(eta_hat)?;
        to_extended(self.partial_raw(label, eta_hat), "partial loss")
    }

    /// Unchecked partial loss; may be NaN for a malformed user loss.
    pub(crate) fn partial_raw(&self, label: Label, eta_hat: f64) -> f64 {
        match label {
            Label::Positive => (self.partial_pos)(eta_hat),
            Label::Negative => (self.partial_neg)(eta_hat),
        }
    }

    pub fn superderivative(&self, eta: f64) -> f64 {
        (self.superderivative)(eta)
    }

    pub fn curvature(&self, eta: f64) -> Option<f64> {
        self.curvature.as_ref().map(|w| w(eta))
    }

    pub(crate) fn curvature_fn(&self) -> Option<ScalarFn> {
        self.curvature.clone()
    }
}

impl BinaryLoss for ProperLoss {
    fn name(&self) -> &str {
        &self.name
    }

    fn prediction_range(&self) -> Interval {
        Interval::UNIT
    }

    fn loss(&self, label: Label, prediction: f64) -> Result<ExtendedReal> {
        if !Interval::UNIT.contains(prediction) {
            return Err(Error::PredictionOutOfRange {
                loss: self.name.clone(),
                prediction,
                range: Interval::UNIT,
            });
        }
        self.partial(label, prediction)
    }

    fn bayes_risk(&self, eta: f64) -> f64 {
        (self.bayes_risk)(eta)
    }
}

impl fmt::Debug for ProperLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProperLoss")
            .field("name", &self.name)
            .field("strong_properness", &self.strong_properness)
            .finish_non_exhaustive()
    }
}

/// A strictly increasing map `psi` from `[0, 1]` onto a prediction range.
#[derive(Clone)]
pub struct Link {
    name: String,
    forward: ScalarFn,
    inverse: ScalarFn,
    derivative: Option<ScalarFn>,
    range: Interval,
}

impl Link {
    pub fn new(
        name: impl Into<String>,
        range: Interval,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            derivative: None,
            range,
        }
    }

    /// Attaches `psi'`, enabling analytic gradients.
    pub fn with_derivative(mut self, derivative: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub(crate) fn with_derivative_fn(mut self, derivative: Option<ScalarFn>) -> Self {
        self.derivative = derivative;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> Interval {
        self.range
    }

    /// `psi(eta_hat)`.
    pub fn forward(&self, eta_hat: f64) -> Result<f64> {
        check_probability(eta_hat)?;
        Ok((self.forward)(eta_hat))
    }

    /// `psi^{-1}(y_hat)`, clamped into `[0, 1]` against rounding.
    pub fn inverse(&self, prediction: f64) -> Result<f64> {
        if !self.range.contains(prediction) {
            return Err(Error::PredictionOutOfRange {
                loss: self.name.clone(),
                prediction,
                range: self.range,
            });
        }
        Ok((self.inverse)(prediction).clamp(0.0, 1.0))
    }

    /// `psi'(eta_hat)`, if known.
    pub fn derivative(&self, eta_hat: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(eta_hat))
    }
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Link")
            .field("name", &self.name)
            .field("range", &self.range)
            .finish_non_exhaustive()
    }
}

/// A proper loss seen through a link: `l(y, y_hat) = c(y, psi^{-1}(y_hat))`.
#[derive(Clone, Debug)]
pub struct CompositeLoss {
    name: String,
    proper: ProperLoss,
    link: Link,
}

impl CompositeLoss {
    pub fn new(name: impl Into<String>, proper: ProperLoss, link: Link) -> Self {
        Self {
            name: name.into(),
            proper,
            link,
        }
    }

    pub fn proper(&self) -> &ProperLoss {
        &self.proper
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    /// The strong properness constant of the underlying proper loss.
    pub fn lambda(&self) -> Option<f64> {
        self.proper.strong_properness()
    }

    /// Replaces the stored strong properness constant.
    pub fn with_lambda(mut self, lambda: Option<f64>) -> Self {
        self.proper = match lambda {
            Some(l) => self.proper.with_strong_properness(l),
            None => self.proper.without_strong_properness(),
        };
        self
    }

    /// `l(y, y_hat)`.
    pub fn evaluate(&self, label: Label, prediction: f64) -> Result<ExtendedReal> {
        let eta_hat = self.plugin(prediction)?;
        self.proper.partial(label, eta_hat)
    }

    /// The class probability estimate `psi^{-1}(y_hat)`.
    pub fn plugin(&self, prediction: f64) -> Result<f64> {
        self.link.inverse(prediction).map_err(|_| Error::PredictionOutOfRange {
            loss: self.name.clone(),
            prediction,
            range: self.link.range(),
        })
    }

    /// The prediction that minimises `L(eta, .)`, namely `psi(eta)`.
    pub fn optimal_prediction(&self, eta: f64) -> Result<f64> {
        self.link.forward(eta)
    }

    /// Analytic derivative of `y_hat -> l(y, y_hat)`.
    ///
    /// Uses `d/dy_hat c(y, psi^{-1}(y_hat)) = (eta_hat - [y = 1]) w(eta_hat) / psi'(eta_hat)`
    /// with `w = -H''`, which holds for any regular proper loss with a twice
    /// differentiable Bayes risk. For canonical links `w / psi' = 1`.
    pub fn gradient(&self, label: Label, prediction: f64) -> Result<f64> {
        let not_diff = |reason| Error::NotDifferentiable {
            loss: self.name.clone(),
            prediction,
            reason,
        };
        let range = self.link.range();
        if !range.contains(prediction) {
            return Err(Error::PredictionOutOfRange {
                loss: self.name.clone(),
                prediction,
                range,
            });
        }
        if !range.contains_interior(prediction) {
            return Err(not_diff("prediction on the boundary of the range"));
        }
        let eta_hat = self
            .link
            .inverse(prediction)?
            .clamp(DERIVATIVE_CLAMP, 1.0 - DERIVATIVE_CLAMP);
        let weight = self
            .proper
            .curvature(eta_hat)
            .ok_or_else(|| not_diff("proper loss has no curvature function"))?;
        let slope = self
            .link
            .derivative(eta_hat)
            .ok_or_else(|| not_diff("link has no derivative"))?;
        let indicator = if label.is_positive() { 1.0 } else { 0.0 };
        let grad = (eta_hat - indicator) * weight / slope;
        if grad.is_finite() {
            Ok(grad)
        } else {
            Err(not_diff("derivative is not finite"))
        }
    }
}

impl BinaryLoss for CompositeLoss {
    fn name(&self) -> &str {
        &self.name
    }

    fn prediction_range(&self) -> Interval {
        self.link.range()
    }

    fn loss(&self, label: Label, prediction: f64) -> Result<ExtendedReal> {
        self.evaluate(label, prediction)
    }

    fn bayes_risk(&self, eta: f64) -> f64 {
        self.proper.bayes_risk(eta)
    }
}

/// Clamps every score into `range`. Order is preserved weakly: scores outside
/// the range collapse onto its endpoints.
pub fn truncate_scores(scores: &ScoringFunction, range: Interval) -> ScoringFunction {
    scores.map_values(|s| range.clamp(s))
}
