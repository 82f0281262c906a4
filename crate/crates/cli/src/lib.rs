//! Batch experiment runner for `proper-rank`.
//!
//! Four subcommands: `certify`, `bound-check`, `sweep` and `train`. Exit code
//! 0 means every check passed, 1 that a mathematical check failed, and 2 an
//! input or usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod config;
pub mod output;
pub mod spec_file;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] proper_rank::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(proper_rank::Error::Diverged { .. } | proper_rank::Error::InvariantViolation(_)) => 1,
            _ => 2,
        }
    }
}

/// Whether every check of a command passed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "proper-rank", version, about = "Exact checks of ranking regret bounds for proper composite losses")]
pub struct Cli {
    /// Root seed for every random draw (default 0, or the config's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Spacing of the certification grid on [0, 1], e.g. 0.00390625.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    /// Slack tolerance for the square-root bounds.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify properness, strict and strong properness, and regularity.
    Certify(CertifyArgs),
    /// Run the randomized bound suites.
    BoundCheck(BoundCheckArgs),
    /// Tabulate surrogate against ranking regret along a scoring family.
    Sweep(SweepArgs),
    /// Fit tabular scores by gradient descent and record the bound.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// A catalog loss: exp, log, sq, spher, exp-can, sq-can, spher-can.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub loss: Option<String>,
    /// A loss specification file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Strong properness constant to certify instead of the stored one.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundCheckArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated catalog losses.
    #[arg(long, value_delimiter = ',')]
    pub losses: Option<Vec<String>>,
    /// Use this constant for every loss in place of the certified one.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated suites to run.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub suites: Option<Vec<config::SuiteKind>>,
    /// Also check the main bound on random scores over this distribution.
    #[arg(long)]
    pub distribution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Comma-separated family parameters in [0, 1].
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub ts: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Smallest radius of the noise certificate grid.
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub distribution: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum FamilyArg {
    Shrink,
    Noise,
    Reverse,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Comma-separated catalog losses.
    #[arg(long, value_delimiter = ',')]
    pub losses: Option<Vec<String>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Train on this many draws instead of the exact risk.
    #[arg(long)]
    pub sampled: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long)]
    pub distribution: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Never panics on bad input.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            use std::io::Write;
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
