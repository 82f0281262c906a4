use thiserror::Error;

use crate::construct::Witness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("prediction {prediction} is outside the range {range} of loss `{loss}`")]
    PredictionOutOfRange {
        loss: String,
        prediction: f64,
        range: crate::Interval,
    },

    #[error("class probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("unknown loss `{0}` (expected one of exp, log, sq, spher, exp-can, sq-can, spher-can)")]
    UnknownLoss(String),

    #[error("loss `{loss}` is not differentiable at prediction {prediction}: {reason}")]
    NotDifferentiable {
        loss: String,
        prediction: f64,
        reason: &'static str,
    },

    #[error("risk function is not concave on the grid (second difference {} at eta = {})", .0.margin, .0.eta)]
    NotConcave(Witness),

    #[error("canonical link is not strictly increasing near eta_hat = {0}; the loss is not strictly proper")]
    NonMonotoneLink(f64),

    #[error("invalid distribution: {field}: {reason}")]
    InvalidDistribution { field: String, reason: String },

    #[error("no score for instance `{0}`")]
    MissingScore(String),

    #[error("score given for `{0}`, which is not in the distribution's support")]
    UnexpectedScore(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss `{0}` carries no strong properness constant")]
    MissingCertification(String),

    #[error("internal cross-check failed: {0}")]
    InvariantViolation(String),

    #[error("training diverged at step {step}: surrogate regret {regret} exceeds ten times the initial {initial}")]
    Diverged {
        step: usize,
        regret: f64,
        initial: f64,
        trajectory: Box<crate::trainer::Trajectory>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn distribution(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidDistribution {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
