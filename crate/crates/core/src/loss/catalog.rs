//! The seven strongly proper composite losses and their building blocks.
//!
//! | name        | range      | proper loss          | link                               | lambda |
//! |-------------|------------|----------------------|------------------------------------|--------|
//! | `exp`       | `[-inf,inf]` | exponential        | `1/2 ln(q/(1-q))`                  | 4      |
//! | `log`       | `[-inf,inf]` | logistic           | `ln(q/(1-q))`                      | 4      |
//! | `sq`        | `[-1,1]`   | squared `4(1-q)^2`   | `2q-1`                             | 8      |
//! | `spher`     | `[0,1]`    | spherical            | identity                           | 1      |
//! | `exp-can`   | `[-inf,inf]` | exponential        | `(2q-1)/sqrt(q(1-q))`              | 4      |
//! | `sq-can`    | `[-1,1]`   | squared `(1-q)^2`    | `2q-1`                             | 2      |
//! | `spher-can` | `[-1,1]`   | spherical            | `(2q-1)/sqrt(q^2+(1-q)^2)`         | 1      |

use super::{CompositeLoss, Link, ProperLoss};
use crate::error::{Error, Result};
use crate::extended::Interval;

/// Identifiers accepted by [`by_name`], in catalog order.
pub const CATALOG_NAMES: [&str; 7] = ["exp", "log", "sq", "spher", "exp-can", "sq-can", "spher-can"];

/// `x ln x` with `0 ln 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn spherical_norm(q: f64) -> f64 {
    q.hypot(1.0 - q)
}

/// `c(1, q) = sqrt((1-q)/q)`, `c(-1, q) = sqrt(q/(1-q))`, `H = 2 sqrt(q(1-q))`.
pub fn exponential_proper() -> ProperLoss {
    ProperLoss::new(
        "exponential",
        |q| ((1.0 - q) / q).sqrt(),
        |q| (q / (1.0 - q)).sqrt(),
        |q| 2.0 * (q * (1.0 - q)).sqrt(),
        |q| (1.0 - 2.0 * q) / (q * (1.0 - q)).sqrt(),
    )
    .with_curvature(|q| 0.5 / (q * (1.0 - q)).powf(1.5))
    .with_strong_properness(4.0)
}

/// Log loss: `c(1, q) = -ln q`, `c(-1, q) = -ln(1-q)`, `H` is the binary entropy.
pub fn logistic_proper() -> ProperLoss {
    ProperLoss::new(
        "logistic",
        |q| -q.ln(),
        |q| -(-q).ln_1p(),
        |q| -xlogx(q) - xlogx(1.0 - q),
        |q| ((1.0 - q) / q).ln(),
    )
    .with_curvature(|q| 1.0 / (q * (1.0 - q)))
    .with_strong_properness(4.0)
}

/// `c(1, q) = 4(1-q)^2`, `c(-1, q) = 4q^2`, `H = 4q(1-q)`.
pub fn squared_proper() -> ProperLoss {
    ProperLoss::new(
        "squared",
        |q| 4.0 * (1.0 - q) * (1.0 - q),
        |q| 4.0 * q * q,
        |q| 4.0 * q * (1.0 - q),
        |q| 4.0 * (1.0 - 2.0 * q),
    )
    .with_curvature(|_| 8.0)
    .with_strong_properness(8.0)
}

/// The squared loss scaled by a quarter: `c(1, q) = (1-q)^2`, `H = q(1-q)`.
pub fn scaled_squared_proper() -> ProperLoss {
    ProperLoss::new(
        "squared-scaled",
        |q| (1.0 - q) * (1.0 - q),
        |q| q * q,
        |q| q * (1.0 - q),
        |q| 1.0 - 2.0 * q,
    )
    .with_curvature(|_| 2.0)
    .with_strong_properness(2.0)
}

/// Spherical scoring rule, `H = 1 - sqrt(q^2 + (1-q)^2)`.
pub fn spherical_proper() -> ProperLoss {
    ProperLoss::new(
        "spherical",
        |q| 1.0 - q / spherical_norm(q),
        |q| 1.0 - (1.0 - q) / spherical_norm(q),
        |q| 1.0 - spherical_norm(q),
        |q| (1.0 - 2.0 * q) / spherical_norm(q),
    )
    .with_curvature(|q| spherical_norm(q).powi(-3))
    .with_strong_properness(1.0)
}

/// `psi(q) = 1/2 ln(q/(1-q))` on the extended line.
pub fn half_logit_link() -> Link {
    Link::new(
        "half-logit",
        Interval::EXTENDED_LINE,
        |q| 0.5 * (q / (1.0 - q)).ln(),
        |y| 1.0 / (1.0 + (-2.0 * y).exp()),
    )
    .with_derivative(|q| 0.5 / (q * (1.0 - q)))
}

/// `psi(q) = ln(q/(1-q))` on the extended line.
pub fn logit_link() -> Link {
    Link::new(
        "logit",
        Interval::EXTENDED_LINE,
        |q| (q / (1.0 - q)).ln(),
        |y| 1.0 / (1.0 + (-y).exp()),
    )
    .with_derivative(|q| 1.0 / (q * (1.0 - q)))
}

/// `psi(q) = scale * (2q - 1)` onto `[-scale, scale]`.
pub fn affine_link(scale: f64) -> Link {
    assert!(scale > 0.0 && scale.is_finite(), "affine link scale must be positive");
    Link::new(
        format!("affine({scale})"),
        Interval::new(-scale, scale).expect("positive scale"),
        move |q| scale * (2.0 * q - 1.0),
        move |y| 0.5 * (y / scale + 1.0),
    )
    .with_derivative(move |_| 2.0 * scale)
}

pub fn identity_link() -> Link {
    Link::new("identity", Interval::UNIT, |q| q, |y| y).with_derivative(|_| 1.0)
}

/// `psi(q) = (2q-1)/sqrt(q(1-q))`, the canonical link of the exponential
/// proper loss. Its inverse is `1/2 (1 + y/sqrt(4 + y^2))`, evaluated without
/// cancellation for negative `y`.
pub fn canonical_exponential_link() -> Link {
    Link::new(
        "canonical-exponential",
        Interval::EXTENDED_LINE,
        |q| (2.0 * q - 1.0) / (q * (1.0 - q)).sqrt(),
        |y| {
            if y.is_infinite() {
                return if y > 0.0 { 1.0 } else { 0.0 };
            }
            let s = 0.5 * y;
            let r = s.hypot(1.0);
            if s >= 0.0 {
                0.5 * (1.0 + s / r)
            } else {
                0.5 / (r * (r - s))
            }
        },
    )
    .with_derivative(|q| 0.5 / (q * (1.0 - q)).powf(1.5))
}

/// `psi(q) = (2q-1)/sqrt(q^2 + (1-q)^2)` onto `[-1, 1]`.
pub fn canonical_spherical_link() -> Link {
    Link::new(
        "canonical-spherical",
        Interval::SYMMETRIC_UNIT,
        |q| (2.0 * q - 1.0) / spherical_norm(q),
        |y| 0.5 * (1.0 + y / (2.0 - y * y).sqrt()),
    )
    .with_derivative(|q| spherical_norm(q).powi(-3))
}

/// `e^{-y y_hat}`.
pub fn exponential() -> CompositeLoss {
    CompositeLoss::new("exp", exponential_proper(), half_logit_link())
}

/// `ln(1 + e^{-y y_hat})`.
pub fn logistic() -> CompositeLoss {
    CompositeLoss::new("log", logistic_proper(), logit_link())
}

/// `(1 - y y_hat)^2` on `[-1, 1]`.
pub fn squared() -> CompositeLoss {
    CompositeLoss::new("sq", squared_proper(), affine_link(1.0))
}

/// Spherical loss with predictions read directly as probabilities.
pub fn spherical() -> CompositeLoss {
    CompositeLoss::new("spher", spherical_proper(), identity_link())
}

/// `sqrt(1 + (y_hat/2)^2) - y y_hat / 2`.
pub fn canonical_exponential() -> CompositeLoss {
    CompositeLoss::new("exp-can", exponential_proper(), canonical_exponential_link())
}

/// `(1 - y y_hat)^2 / 4` on `[-1, 1]`.
pub fn canonical_squared() -> CompositeLoss {
    CompositeLoss::new("sq-can", scaled_squared_proper(), affine_link(1.0))
}

/// `1 - (sqrt(2 - y_hat^2) + y y_hat) / 2` on `[-1, 1]`.
pub fn canonical_spherical() -> CompositeLoss {
    CompositeLoss::new("spher-can", spherical_proper(), canonical_spherical_link())
}

/// `(1 - y y_hat / 4)^2` on `[-4, 4]`: the unscaled squared proper loss with
/// its canonical link `4(2q - 1)`. Not part of [`catalog`].
pub fn canonical_squared_wide() -> CompositeLoss {
    CompositeLoss::new("sq-can-wide", squared_proper(), affine_link(4.0))
}

/// The seven catalog losses, in the order of [`CATALOG_NAMES`].
pub fn catalog() -> Vec<CompositeLoss> {
    vec![
        exponential(),
        logistic(),
        squared(),
        spherical(),
        canonical_exponential(),
        canonical_squared(),
        canonical_spherical(),
    ]
}

pub fn by_name(name: &str) -> Result<CompositeLoss> {
    match name {
        "exp" => Ok(exponential()),
        "log" => Ok(logistic()),
        "sq" => Ok(squared()),
        "spher" => Ok(spherical()),
        "exp-can" => Ok(canonical_exponential()),
        "sq-can" => Ok(canonical_squared()),
        "spher-can" => Ok(canonical_spherical()),
        other => Err(Error::UnknownLoss(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extended::Label;
    use crate::loss::BinaryLoss;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Closed forms written directly in the prediction, independent of the
    /// proper-loss-through-link composition.
    fn direct(name: &str, y: f64, yh: f64) -> f64 {
        match name {
            "exp" => (-y * yh).exp(),
            "log" => (-y * yh).exp().ln_1p(),
            "sq" => (1.0 - y * yh).powi(2),
            "spher" => {
                let n = (yh * yh + (1.0 - yh) * (1.0 - yh)).sqrt();
                if y > 0.0 {
                    1.0 - yh / n
                } else {
                    1.0 - (1.0 - yh) / n
                }
            }
            "exp-can" => (1.0 + (yh / 2.0).powi(2)).sqrt() - y * yh / 2.0,
            "sq-can" => 0.25 * (1.0 - y * yh).powi(2),
            "spher-can" => 1.0 - 0.5 * ((2.0 - yh * yh).sqrt() + y * yh),
            _ => unreachable!(),
        }
    }

    #[test]
    fn catalog_has_the_seven_entries_with_their_constants() {
        let got: Vec<(String, f64)> = catalog()
            .iter()
            .map(|l| (l.name().to_string(), l.lambda().unwrap()))
            .collect();
        let want = [
            ("exp", 4.0),
            ("log", 4.0),
            ("sq", 8.0),
            ("spher", 1.0),
            ("exp-can", 4.0),
            ("sq-can", 2.0),
            ("spher-can", 1.0),
        ];
        assert_eq!(got.len(), 7);
        for ((n, l), (wn, wl)) in got.iter().zip(want) {
            assert_eq!(n, wn);
            assert_eq!(*l, wl);
        }
        for name in CATALOG_NAMES {
            assert_eq!(by_name(name).unwrap().name(), name);
        }
        assert!(matches!(by_name("hinge"), Err(Error::UnknownLoss(_))));
    }

    #[test]
    fn catalog_examples() {
        assert_eq!(exponential().link().forward(0.5).unwrap(), 0.0);
        for l in catalog() {
            if l.prediction_range().contains(0.0) && l.name() != "spher" {
                assert!(l.link().forward(0.5).unwrap().abs() < 1e-15, "{}", l.name());
            }
        }
        assert_relative_eq!(
            canonical_exponential().link().forward(0.9).unwrap(),
            0.8 / 0.3,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            canonical_spherical().evaluate(Label::Positive, 0.0).unwrap().get(),
            1.0 - 0.5 * 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            canonical_spherical().evaluate(Label::Positive, 0.0).unwrap().get(),
            0.292893,
            epsilon = 1e-6
        );
    }

    #[test]
    fn composite_matches_direct_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for l in catalog() {
            let range = l.prediction_range();
            for _ in 0..1000 {
                let yh = if range.is_bounded() {
                    rng.random_range(range.lo..=range.hi)
                } else {
                    rng.sample::<f64, _>(StandardNormal)
                };
                let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let label = if y > 0.0 { Label::Positive } else { Label::Negative };
                let got = l.evaluate(label, yh).unwrap().get();
                let want = direct(l.name(), y, yh);
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{} y={y} yh={yh}: {got} vs {want}",
                    l.name()
                );
            }
        }
    }

    #[test]
    fn wide_canonical_squared() {
        let l = canonical_squared_wide();
        assert_eq!(l.prediction_range(), Interval::new(-4.0, 4.0).unwrap());
        for &yh in &[-4.0, -1.5, 0.0, 2.5, 4.0] {
            for y in [1.0, -1.0] {
                let label = Label::from_sign(y as i32).unwrap();
                let want = (1.0 - y * yh / 4.0_f64).powi(2);
                assert_relative_eq!(l.evaluate(label, yh).unwrap().get(), want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn link_round_trip_on_grid() {
        for l in catalog().iter().chain(std::iter::once(&canonical_squared_wide())) {
            let link = l.link();
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=256 {
                let q = k as f64 / 256.0;
                let y = link.forward(q).unwrap();
                if k > 0 {
                    assert!(y > prev, "{} not increasing at {q}", link.name());
                }
                prev = y;
                let back = link.inverse(y).unwrap();
                assert!((back - q).abs() <= 1e-10, "{} at {q}: {back}", link.name());
            }
        }
    }

    #[test]
    fn canonical_links_have_unit_weight_ratio() {
        for l in [logistic(), canonical_exponential(), canonical_squared(), canonical_spherical()] {
            for k in 1..256 {
                let q = k as f64 / 256.0;
                let ratio = l.proper().curvature(q).unwrap() / l.link().derivative(q).unwrap();
                assert!((ratio - 1.0).abs() < 1e-12, "{} at {q}: {ratio}", l.name());
            }
        }
    }

    #[test]
    fn catalog_is_proper_and_monotone_on_the_grid() {
        let n = 256;
        for l in catalog() {
            let c = l.proper();
            for i in 0..=n {
                let eta = i as f64 / n as f64;
                let h = c.bayes_risk(eta);
                let diag = c.conditional_risk(eta, eta).unwrap().get();
                assert!((diag - h).abs() < 1e-12, "{} diagonal at {eta}", l.name());
                for j in 0..=n {
                    let q = j as f64 / n as f64;
                    let risk = c.conditional_risk(eta, q).unwrap().get();
                    assert!(risk >= h - 1e-12, "{} at ({eta}, {q})", l.name());
                }
            }
            for j in 1..n - 1 {
                let (q0, q1) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
                assert!(c.partial_raw(Label::Positive, q1) <= c.partial_raw(Label::Positive, q0));
                assert!(c.partial_raw(Label::Negative, q1) >= c.partial_raw(Label::Negative, q0));
            }
        }
    }

    #[test]
    fn squared_regret_identity_on_grid() {
        let c = squared_proper();
        let n = 256;
        for i in 0..=n {
            for j in 0..=n {
                let (eta, q) = (i as f64 / n as f64, j as f64 / n as f64);
                let lhs = c.conditional_risk(eta, q).unwrap().get() - c.bayes_risk(eta);
                assert!((lhs - 4.0 * (eta - q).powi(2)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bayes_risks_are_concave_on_the_grid() {
        let n = 256;
        for l in catalog() {
            for i in 1..n {
                let x = |k: usize| l.bayes_risk(k as f64 / n as f64);
                let second = x(i - 1) - 2.0 * x(i) + x(i + 1);
                assert!(second <= 1e-9, "{} at {i}", l.name());
            }
        }
    }
}
