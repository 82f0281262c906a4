//! Loss specification files for `certify --spec`.
//!
//! A file gives either the two partial losses or a concave Bayes risk with
//! its derivative, as expressions in `x`:
//!
//! ```json
//! { "name": "linear", "partial_pos": "1 - x", "partial_neg": "x" }
//! { "name": "brier", "bayes_risk": "4 * x * (1 - x)", "superderivative": "4 - 8 * x", "lambda": 8 }
//! ```
//!
//! Expressions use evalexpr syntax: `math::sqrt`, `math::ln`, `^` for powers.
//! Integer literals divide as integers, so write `1.0 / 2` rather than `1 / 2`.

use std::path::Path;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use proper_rank::construct::{from_concave_risk, ConcaveRiskSpec, Grid, Property};
use proper_rank::ProperLoss;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpecFile {
    pub name: String,
    #[serde(default)]
    pub partial_pos: Option<String>,
    #[serde(default)]
    pub partial_neg: Option<String>,
    #[serde(default)]
    pub bayes_risk: Option<String>,
    #[serde(default)]
    pub superderivative: Option<String>,
    /// `-H''`, optional.
    #[serde(default)]
    pub curvature: Option<String>,
    /// Strong properness constant to certify.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Properties the exit code depends on; all that were run by default.
    #[serde(default)]
    pub claims: Option<Vec<Property>>,
}

/// A compiled expression in `x`. Evaluation errors come out as NaN, which
/// every certifier treats as a failure.
#[derive(Clone)]
struct Expr(Arc<Node<DefaultNumericTypes>>);

impl Expr {
    fn parse(field: &str, text: &str) -> Result<Self, CliError> {
        let node = evalexpr::build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|e| CliError::Usage(format!("{field}: cannot parse `{text}`: {e}")))?;
        let expr = Self(Arc::new(node));
        expr.try_eval(0.5)
            .map_err(|e| CliError::Usage(format!("{field}: cannot evaluate `{text}` at x = 0.5: {e}")))?;
        Ok(expr)
    }

    fn try_eval(&self, x: f64) -> Result<f64, evalexpr::EvalexprError<DefaultNumericTypes>> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x))?;
        self.0.eval_number_with_context(&ctx)
    }

    fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    fn into_fn(self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        move |x| self.eval(x)
    }
}

fn required<'a>(field: &str, value: &'a Option<String>) -> Result<&'a str, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{field}` is required alongside its counterpart")))
}

impl LossSpecFile {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Builds the loss. A risk that fails the concavity check is returned as
    /// the core error so the caller can report it as a failed certification.
    pub fn build(&self, grid: Grid) -> Result<Result<ProperLoss, proper_rank::Error>, CliError> {
        let by_partials = self.partial_pos.is_some() || self.partial_neg.is_some();
        let by_risk = self.bayes_risk.is_some() || self.superderivative.is_some();
        if by_partials == by_risk {
            return Err(CliError::Usage(
                "a spec needs either `partial_pos` and `partial_neg`, or `bayes_risk` and `superderivative`".into(),
            ));
        }
        let curvature = self
            .curvature
            .as_deref()
            .map(|c| Expr::parse("curvature", c))
            .transpose()?;
        let loss = if by_partials {
            let pos = Expr::parse("partial_pos", required("partial_pos", &self.partial_pos)?)?;
            let neg = Expr::parse("partial_neg", required("partial_neg", &self.partial_neg)?)?;
            Ok(ProperLoss::from_partials(self.name.clone(), pos.into_fn(), neg.into_fn()))
        } else {
            let h = Expr::parse("bayes_risk", required("bayes_risk", &self.bayes_risk)?)?;
            let dh = Expr::parse("superderivative", required("superderivative", &self.superderivative)?)?;
            let mut spec = ConcaveRiskSpec::new(h.into_fn(), dh.into_fn());
            if let Some(l) = self.lambda {
                spec = spec.with_claimed_lambda(l);
            }
            from_concave_risk(self.name.clone(), &spec, grid)
        };
        Ok(loss.map(|mut c| {
            if let Some(k) = curvature {
                c = c.with_curvature(k.into_fn());
            }
            match self.lambda {
                Some(l) => c.with_strong_properness(l),
                None => c,
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proper_rank::{BinaryLoss, Label};

    fn parse(text: &str) -> LossSpecFile {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn partials_spec() {
        let spec = parse(r#"{"name": "linear", "partial_pos": "1 - x", "partial_neg": "x"}"#);
        let c = spec.build(Grid::default()).unwrap().unwrap();
        assert_eq!(c.loss(Label::Positive, 0.25).unwrap().get(), 0.75);
        assert_eq!(c.loss(Label::Negative, 0.25).unwrap().get(), 0.25);
    }

    #[test]
    fn risk_spec_matches_closed_form() {
        let spec = parse(
            r#"{"name": "brier", "bayes_risk": "4 * x * (1 - x)", "superderivative": "4 - 8 * x", "lambda": 8}"#,
        );
        let c = spec.build(Grid::default()).unwrap().unwrap();
        assert_eq!(c.strong_properness(), Some(8.0));
        for q in [0.0, 0.3, 0.5, 1.0] {
            let want = 4.0 * (1.0 - q) * (1.0 - q);
            assert!((c.loss(Label::Positive, q).unwrap().get() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn convex_risk_is_reported_not_rejected() {
        let spec = parse(r#"{"name": "convex", "bayes_risk": "x * x", "superderivative": "2 * x"}"#);
        assert!(matches!(
            spec.build(Grid::default()).unwrap(),
            Err(proper_rank::Error::NotConcave(_))
        ));
    }

    #[test]
    fn malformed_specs_are_usage_errors() {
        for text in [
            r#"{"name": "x", "partial_pos": "1 - x"}"#,
            r#"{"name": "x", "partial_pos": "1 - x", "partial_neg": "x", "bayes_risk": "x"}"#,
            r#"{"name": "x", "partial_pos": "1 - (", "partial_neg": "x"}"#,
            r#"{"name": "x", "partial_pos": "y", "partial_neg": "x"}"#,
        ] {
            assert!(matches!(parse(text).build(Grid::default()), Err(CliError::Usage(_))), "{text}");
        }
    }
}
