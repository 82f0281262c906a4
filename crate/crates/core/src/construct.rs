//! Proper losses from concave Bayes risks, canonical links, and grid
//! certification of properness, strict and strong properness, and regularity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Interval, Label};
use crate::loss::{BinaryLoss, Link, ProperLoss, ScalarFn};

/// Absolute tolerance of every certification inequality.
pub const CERTIFICATION_TOLERANCE: f64 = 1e-9;

/// The uniform grid `{k / (n - 1) : k = 0, ..., n - 1}` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { points: 257 }
    }
}

impl Grid {
    pub fn with_points(points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::invalid("a certification grid needs at least 3 points"));
        }
        Ok(Self { points })
    }

    /// The grid whose spacing is `step`; `1 / step` must be a whole number.
    pub fn from_step(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(Error::invalid(format!("grid step {step} is outside (0, 1/2]")));
        }
        let intervals = (1.0 / step).round();
        if ((1.0 / step) - intervals).abs() > 1e-9 * intervals {
            return Err(Error::invalid(format!("grid step {step} does not divide [0, 1] evenly")));
        }
        Self::with_points(intervals as usize + 1)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn value(&self, k: usize) -> f64 {
        k as f64 / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.value(k)).collect()
    }
}

/// A concave conditional Bayes risk `H` with a fixed superderivative `H'`.
#[derive(Clone)]
pub struct ConcaveRiskSpec {
    bayes_risk: ScalarFn,
    superderivative: ScalarFn,
    curvature: Option<ScalarFn>,
    claimed_lambda: Option<f64>,
}

impl ConcaveRiskSpec {
    pub fn new(
        bayes_risk: impl Fn(f64) -> f64 + Send + Sync + 'static,
        superderivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            bayes_risk: Arc::new(bayes_risk),
            superderivative: Arc::new(superderivative),
            curvature: None,
            claimed_lambda: None,
        }
    }

    /// `-H''`, passed through to the constructed loss.
    pub fn with_curvature(mut self, curvature: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.curvature = Some(Arc::new(curvature));
        self
    }

    pub fn with_claimed_lambda(mut self, lambda: f64) -> Self {
        self.claimed_lambda = Some(lambda);
        self
    }

    pub fn claimed_lambda(&self) -> Option<f64> {
        self.claimed_lambda
    }

    pub fn bayes_risk(&self, eta: f64) -> f64 {
        (self.bayes_risk)(eta)
    }

    pub fn superderivative(&self, eta: f64) -> f64 {
        (self.superderivative)(eta)
    }
}

impl std::fmt::Debug for ConcaveRiskSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConcaveRiskSpec")
            .field("claimed_lambda", &self.claimed_lambda)
            .finish_non_exhaustive()
    }
}

/// `H(q) + (1 - q) H'(q)` and `H(q) - q H'(q)` with `0 * inf = 0`.
fn savage_partials(h: f64, dh: f64, q: f64) -> (f64, f64) {
    let slope = ExtendedReal::new(dh).unwrap_or(ExtendedReal::INFINITY);
    let h = ExtendedReal::new(h).unwrap_or(ExtendedReal::INFINITY);
    let pos = h.checked_add(slope.scale(1.0 - q)).map_or(f64::NAN, |v| v.get());
    let neg = h.checked_add(-slope.scale(q)).map_or(f64::NAN, |v| v.get());
    (pos, neg)
}

/// The most negative violation of midpoint concavity on the grid, if any
/// second difference exceeds the tolerance.
fn concavity_violation(h: &dyn Fn(f64) -> f64, grid: Grid) -> Option<Witness> {
    let values: Vec<f64> = grid.values().into_iter().map(h).collect();
    let mut worst: Option<Witness> = None;
    for k in 1..grid.points() - 1 {
        let second = values[k - 1] - 2.0 * values[k] + values[k + 1];
        if second > CERTIFICATION_TOLERANCE || second.is_nan() {
            let margin = -second;
            if worst.as_ref().is_none_or(|w| margin < w.margin || margin.is_nan()) {
                worst = Some(Witness {
                    eta: grid.value(k),
                    eta_hat: grid.value(k),
                    margin,
                });
            }
        }
    }
    worst
}

/// Builds the proper loss `c(1, q) = H(q) + (1 - q) H'(q)`,
/// `c(-1, q) = H(q) - q H'(q)` from a concave `H`.
///
/// Fails with [`Error::NotConcave`] if a grid second difference of `H` is
/// positive, and with [`Error::InvalidArgument`] if a partial loss is
/// negative or undefined at a grid point.
pub fn from_concave_risk(name: impl Into<String>, spec: &ConcaveRiskSpec, grid: Grid) -> Result<ProperLoss> {
    let name = name.into();
    if let Some(w) = concavity_violation(&*spec.bayes_risk, grid) {
        return Err(Error::NotConcave(w));
    }
    for q in grid.values() {
        let (pos, neg) = savage_partials(spec.bayes_risk(q), spec.superderivative(q), q);
        if !(pos >= -CERTIFICATION_TOLERANCE && neg >= -CERTIFICATION_TOLERANCE) {
            return Err(Error::invalid(format!(
                "Savage partial losses ({pos}, {neg}) at eta_hat = {q} are not in [0, inf]"
            )));
        }
    }
    let (h1, d1) = (spec.bayes_risk.clone(), spec.superderivative.clone());
    let (h2, d2) = (spec.bayes_risk.clone(), spec.superderivative.clone());
    let (h3, d3) = (spec.bayes_risk.clone(), spec.superderivative.clone());
    let mut loss = ProperLoss::new(
        name,
        move |q| savage_partials(h1(q), d1(q), q).0,
        move |q| savage_partials(h2(q), d2(q), q).1,
        move |q| h3(q),
        move |q| d3(q),
    );
    if let Some(w) = spec.curvature.clone() {
        loss = loss.with_curvature(move |q| w(q));
    }
    if let Some(l) = spec.claimed_lambda {
        loss = loss.with_strong_properness(l);
    }
    Ok(loss)
}

/// The canonical link `psi(q) = c(-1, q) - c(1, q)`.
///
/// The inverse is found by bisection. Fails with [`Error::NonMonotoneLink`]
/// if `psi` is not strictly increasing on the grid, which happens exactly
/// when `c` is not strictly proper at grid resolution.
pub fn canonical_link(c: &ProperLoss, grid: Grid) -> Result<Link> {
    let c1 = c.clone();
    let psi = move |q: f64| c1.partial_raw(Label::Negative, q) - c1.partial_raw(Label::Positive, q);
    let values: Vec<f64> = grid.values().into_iter().map(&psi).collect();
    for k in 1..values.len() {
        if !(values[k] > values[k - 1]) {
            return Err(Error::NonMonotoneLink(grid.value(k)));
        }
    }
    let range = Interval::new(values[0], values[values.len() - 1]).expect("psi is increasing");
    let inv_psi = psi.clone();
    let inverse = move |y: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inv_psi(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if y <= inv_psi(0.0) {
            0.0
        } else if y >= inv_psi(1.0) {
            1.0
        } else {
            0.5 * (lo + hi)
        }
    };
    Ok(Link::new(format!("canonical({})", c.name()), range, psi, inverse)
        .with_derivative_fn(c.curvature_fn()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Proper,
    StrictlyProper,
    StronglyProper,
    Regular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The grid pair with the smallest margin. For a failing report the margin is
/// below `-CERTIFICATION_TOLERANCE`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub eta: f64,
    pub eta_hat: f64,
    #[serde(with = "crate::extended::extended_f64")]
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub property: Property,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub grid_step: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `L(eta, q)` as an extended real; NaN partials come back as `None`.
fn risk_at(c: &ProperLoss, eta: f64, q: f64) -> Option<ExtendedReal> {
    let pos = ExtendedReal::new(c.partial_raw(Label::Positive, q))?;
    let neg = ExtendedReal::new(c.partial_raw(Label::Negative, q))?;
    pos.scale(eta).checked_add(neg.scale(1.0 - eta))
}

/// Runs `margin(eta, q)` over all off-diagonal grid pairs and returns the
/// argmin, or the first pair where the margin is undefined.
fn worst_pair(grid: Grid, margin: impl Fn(f64, f64) -> Option<f64>) -> (Witness, bool) {
    let mut worst = Witness {
        eta: f64::NAN,
        eta_hat: f64::NAN,
        margin: f64::INFINITY,
    };
    for i in 0..grid.points() {
        let eta = grid.value(i);
        for j in 0..grid.points() {
            if i == j {
                continue;
            }
            let q = grid.value(j);
            match margin(eta, q) {
                Some(m) if !m.is_nan() => {
                    if m < worst.margin || worst.eta.is_nan() {
                        worst = Witness { eta, eta_hat: q, margin: m };
                    }
                }
                _ => {
                    return (
                        Witness {
                            eta,
                            eta_hat: q,
                            margin: f64::NAN,
                        },
                        false,
                    )
                }
            }
        }
    }
    (worst, true)
}

/// Difference of extended reals `a - b` where `b` may be infinite; two equal
/// infinities count as a zero gap.
fn gap(a: ExtendedReal, b: ExtendedReal) -> f64 {
    if a == b {
        0.0
    } else {
        a.get() - b.get()
    }
}

fn monotonicity_notes(c: &ProperLoss, grid: Grid) -> Vec<String> {
    let mut notes = Vec::new();
    let n = grid.points();
    for k in 1..n - 2 {
        let (q0, q1) = (grid.value(k), grid.value(k + 1));
        let (p0, p1) = (c.partial_raw(Label::Positive, q0), c.partial_raw(Label::Positive, q1));
        if !(p1 <= p0 + CERTIFICATION_TOLERANCE) {
            notes.push(format!("c(1, .) increases between {q0} and {q1}"));
            break;
        }
    }
    for k in 1..n - 2 {
        let (q0, q1) = (grid.value(k), grid.value(k + 1));
        let (m0, m1) = (c.partial_raw(Label::Negative, q0), c.partial_raw(Label::Negative, q1));
        if !(m1 >= m0 - CERTIFICATION_TOLERANCE) {
            notes.push(format!("c(-1, .) decreases between {q0} and {q1}"));
            break;
        }
    }
    notes
}

/// Passes iff `L(eta, eta) <= L(eta, q) + 1e-9` for all grid pairs and the
/// partial losses are monotone on the interior grid points.
pub fn certify_proper(c: &ProperLoss, grid: Grid) -> CertificationReport {
    let (witness, defined) = worst_pair(grid, |eta, q| {
        Some(gap(risk_at(c, eta, q)?, risk_at(c, eta, eta)?))
    });
    let mut notes = monotonicity_notes(c, grid);
    if !defined {
        notes.push(format!(
            "partial loss is undefined near (eta, eta_hat) = ({}, {})",
            witness.eta, witness.eta_hat
        ));
    }
    let pass = defined && witness.margin >= -CERTIFICATION_TOLERANCE && notes.is_empty();
    finish(Property::Proper, None, pass, Some(witness), grid, notes)
}

/// Passes iff `L(eta, q) > L(eta, eta) + 1e-9` for every off-diagonal pair.
/// A failing witness may have a margin in `[0, 1e-9]`: a flat risk is not a
/// properness violation.
pub fn certify_strictly_proper(c: &ProperLoss, grid: Grid) -> CertificationReport {
    let (witness, defined) = worst_pair(grid, |eta, q| {
        Some(gap(risk_at(c, eta, q)?, risk_at(c, eta, eta)?))
    });
    let mut notes = Vec::new();
    if !defined {
        notes.push("partial loss is undefined on the grid".to_string());
    }
    let pass = defined && witness.margin > CERTIFICATION_TOLERANCE;
    finish(Property::StrictlyProper, None, pass, Some(witness), grid, notes)
}

/// Passes iff `L(eta, q) - H(eta) >= (lambda / 2)(eta - q)^2 - 1e-9` on the
/// whole grid. The witness is the pair with the smallest slack.
pub fn certify_strongly_proper(c: &ProperLoss, lambda: f64, grid: Grid) -> Result<CertificationReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda = {lambda} must be positive and finite")));
    }
    let (witness, defined) = worst_pair(grid, |eta, q| {
        let regret = risk_at(c, eta, q)?.minus(c.bayes_risk(eta));
        Some(regret.get() - 0.5 * lambda * (eta - q) * (eta - q))
    });
    let diagonal_ok = grid.values().into_iter().all(|eta| {
        risk_at(c, eta, eta).is_some_and(|r| r.get() - c.bayes_risk(eta) >= -CERTIFICATION_TOLERANCE)
    });
    let mut notes = Vec::new();
    if !diagonal_ok {
        notes.push("L(eta, eta) falls below H(eta) on the diagonal".to_string());
    }
    if !defined {
        notes.push("partial loss is undefined on the grid".to_string());
    }
    let pass = defined && diagonal_ok && witness.margin >= -CERTIFICATION_TOLERANCE;
    Ok(finish(Property::StronglyProper, Some(lambda), pass, Some(witness), grid, notes))
}

/// Passes iff `c(1, q)` is finite on `(0, 1]` and `c(-1, q)` is finite on
/// `[0, 1)`, both nonnegative. Infinite values at the two allowed endpoints
/// are noted.
pub fn certify_regular(c: &ProperLoss, grid: Grid) -> CertificationReport {
    let mut notes = Vec::new();
    let mut pass = true;
    let n = grid.points();
    for k in 0..n {
        let q = grid.value(k);
        for label in [Label::Positive, Label::Negative] {
            let v = c.partial_raw(label, q);
            let allowed_infinite = (label == Label::Positive && k == 0) || (label == Label::Negative && k == n - 1);
            if v.is_nan() || v < -CERTIFICATION_TOLERANCE || v == f64::NEG_INFINITY {
                pass = false;
                notes.push(format!("c({label}, {q}) = {v} is not in [0, inf]"));
            } else if v == f64::INFINITY {
                if allowed_infinite {
                    notes.push(format!("c({label}, {q}) = inf"));
                } else {
                    pass = false;
                    notes.push(format!("c({label}, {q}) = inf where it must be finite"));
                }
            }
        }
    }
    finish(Property::Regular, None, pass, None, grid, notes)
}

fn finish(
    property: Property,
    lambda: Option<f64>,
    pass: bool,
    witness: Option<Witness>,
    grid: Grid,
    notes: Vec<String>,
) -> CertificationReport {
    CertificationReport {
        property,
        lambda,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        witness,
        grid_step: grid.step(),
        notes,
    }
}

/// The largest `m` with
/// `H(t a + (1 - t) b) >= t H(a) + (1 - t) H(b) + (m / 2) t (1 - t) (a - b)^2`
/// over all grid triples `a < x < b`, clamped at zero. For a twice
/// differentiable `H` this approaches `inf(-H'')`.
pub fn strong_concavity_modulus(h: impl Fn(f64) -> f64, grid: Grid) -> f64 {
    let xs = grid.values();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    let n = xs.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 2..n {
            let width = xs[j] - xs[i];
            for k in i + 1..j {
                let t = (xs[j] - xs[k]) / width;
                let chord = t * hs[i] + (1.0 - t) * hs[j];
                let m = 2.0 * (hs[k] - chord) / (t * (1.0 - t) * width * width);
                if m < best {
                    best = m;
                }
            }
        }
    }
    best.max(0.0)
}

/// Every grid second difference is below `-1e-9`.
pub fn is_strictly_concave(h: impl Fn(f64) -> f64, grid: Grid) -> bool {
    let hs: Vec<f64> = grid.values().into_iter().map(h).collect();
    hs.windows(3)
        .all(|w| w[0] - 2.0 * w[1] + w[2] < -CERTIFICATION_TOLERANCE)
}
