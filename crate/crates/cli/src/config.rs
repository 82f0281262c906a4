//! Experiment configuration: one JSON document, overridable from the command
//! line.

use std::path::{Path, PathBuf};

use proper_rank::bounds::ScoreFamily;
use proper_rank::trainer::{Init, TrainMode};
use proper_rank::FiniteDistribution;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

fn default_trials() -> usize {
    1000
}

fn default_losses() -> Vec<String> {
    proper_rank::loss::CATALOG_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Which randomized suites `bound-check` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    Main,
    Midpoint,
    Plugin,
    ClemenconIdentity,
    PairwiseIdentity,
    Bartlett,
    Kotlowski,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 7] = [
        SuiteKind::Main,
        SuiteKind::Midpoint,
        SuiteKind::Plugin,
        SuiteKind::ClemenconIdentity,
        SuiteKind::PairwiseIdentity,
        SuiteKind::Bartlett,
        SuiteKind::Kotlowski,
    ];
}

fn default_suites() -> Vec<SuiteKind> {
    SuiteKind::ALL.to_vec()
}

/// Overrides for the slack tolerances. `bound` applies to the square-root
/// bounds, `exact` to identities and the plug-in bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(default = "default_sweep_loss")]
    pub loss: String,
    #[serde(default = "default_family")]
    pub family: ScoreFamily,
    /// Family parameters, each in `[0, 1]`.
    #[serde(default = "default_ts")]
    pub ts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    /// Radii for the noise certificate; a geometric grid on `[t_min, 1]`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
}

fn default_sweep_loss() -> String {
    "log".into()
}

fn default_family() -> ScoreFamily {
    ScoreFamily::Noise
}

fn default_ts() -> Vec<f64> {
    vec![0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0]
}

fn default_t_min() -> f64 {
    0.05
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            loss: default_sweep_loss(),
            family: default_family(),
            ts: default_ts(),
            alpha: 0.0,
            t_grid: None,
            t_min: default_t_min(),
        }
    }
}

impl SweepSettings {
    pub fn t_grid(&self) -> Vec<f64> {
        if let Some(g) = &self.t_grid {
            return g.clone();
        }
        const POINTS: usize = 20;
        let lo = self.t_min;
        (0..POINTS)
            .map(|k| lo * (1.0 / lo).powf(k as f64 / (POINTS - 1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Shared by every loss when set; otherwise 0.1 for the squared losses
    /// and 1 for the rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub mode: TrainMode,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_steps() -> usize {
    500
}

fn default_record_every() -> usize {
    10
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            learning_rate: None,
            mode: TrainMode::Exact,
            init: Init::Zeros,
            record_every: default_record_every(),
        }
    }
}

impl TrainSettings {
    pub fn learning_rate_for(&self, loss: &str) -> f64 {
        self.learning_rate.unwrap_or(match loss {
            "sq" | "sq-can" | "sq-can-wide" => 0.1,
            _ => 1.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_losses")]
    pub losses: Vec<String>,
    /// A distribution object, or a path to one relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Replaces the stored strong properness constant of every loss in
    /// `bound-check`. Meant for negative controls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default = "default_suites")]
    pub suites: Vec<SuiteKind>,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: default_trials(),
            losses: default_losses(),
            distribution: None,
            output: None,
            tolerances: Tolerances::default(),
            lambda: None,
            grid_step: None,
            suites: default_suites(),
            sweep: SweepSettings::default(),
            train: TrainSettings::default(),
            base_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(CliError::Usage("trials must be at least 1".into()));
        }
        if self.losses.is_empty() {
            return Err(CliError::Usage("at least one loss is required".into()));
        }
        for name in &self.losses {
            proper_rank::loss::by_name(name)?;
        }
        for (what, t) in [("bound", self.tolerances.bound), ("exact", self.tolerances.exact)] {
            if let Some(t) = t {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(CliError::Usage(format!("{what} tolerance {t} must be finite and nonnegative")));
                }
            }
        }
        Ok(())
    }

    /// The configured distribution, or the bundled demo.
    pub fn distribution(&self) -> Result<FiniteDistribution, CliError> {
        match &self.distribution {
            None => Ok(FiniteDistribution::demo()),
            Some(Value::String(path)) => {
                let path = match &self.base_dir {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => PathBuf::from(path),
                };
                Ok(FiniteDistribution::from_path(path)?)
            }
            Some(v @ Value::Object(_)) => Ok(FiniteDistribution::from_json_str(&v.to_string())?),
            Some(other) => Err(CliError::Usage(format!(
                "distribution must be an object or a path, found {other}"
            ))),
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
