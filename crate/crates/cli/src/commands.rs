use std::path::{Path, PathBuf};

use proper_rank::bounds::{
    check_main_bound, check_main_bound_with_lambda, low_noise_diagnostic, BoundReport, ScoreFamily, BOUND_TOLERANCE,
};
use proper_rank::construct::{
    certify_proper, certify_regular, certify_strictly_proper, certify_strongly_proper, CertificationReport, Grid,
    Property, Verdict,
};
use proper_rank::loss::by_name;
use proper_rank::trainer::{fit_scores, plugin_from_scores, TrainConfig, TrainMode};
use proper_rank::trials::{random_scores, summarize, trial_rng, ScoreStyle, Suite};
use proper_rank::{BinaryLoss, Error, FiniteDistribution};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SuiteKind, Tolerances};
use crate::output::{fmt_f64, fmt_opt, OutputDir};
use crate::spec_file::LossSpecFile;
use crate::{BoundCheckArgs, CertifyArgs, Cli, CliError, Command, FamilyArg, Outcome, SweepArgs, TrainArgs};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! warn {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($t)*);
    }};
}

const DEFAULT_OUT: &str = "out";

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Certify(args) => certify(cli, args),
        Command::BoundCheck(args) => bound_check(cli, args),
        Command::Sweep(args) => sweep(cli, args),
        Command::Train(args) => train(cli, args),
    }
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if let Some(g) = cli.grid_step {
        cfg.grid_step = Some(g);
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerances.bound = Some(t);
    }
    Ok(cfg)
}

/// Flag paths are relative to the working directory, config paths to the
/// config file.
fn set_distribution(cfg: &mut ExperimentConfig, path: &Option<PathBuf>) -> Result<(), CliError> {
    if let Some(p) = path {
        let abs = std::path::absolute(p).map_err(|e| CliError::io(p, e))?;
        cfg.distribution = Some(Value::String(abs.to_string_lossy().into_owned()));
    }
    Ok(())
}

fn grid(cfg: &ExperimentConfig) -> Result<Grid, CliError> {
    Ok(match cfg.grid_step {
        Some(step) => Grid::from_step(step)?,
        None => Grid::default(),
    })
}

fn output_dir(cfg: &ExperimentConfig) -> Result<OutputDir, CliError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    OutputDir::create(&dir)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn retolerate(r: &mut BoundReport, tol: &Tolerances) {
    let t = if r.tolerance == BOUND_TOLERANCE {
        tol.bound
    } else {
        tol.exact
    };
    if let Some(t) = t {
        r.tolerance = t;
        r.holds = r.slack >= -t;
    }
}

fn check_lambda(lambda: Option<f64>) -> Result<(), CliError> {
    match lambda {
        Some(l) if !(l > 0.0 && l.is_finite()) => Err(CliError::Usage(format!("lambda {l} must be positive and finite"))),
        _ => Ok(()),
    }
}

fn certify(cli: &Cli, args: &CertifyArgs) -> Result<Outcome, CliError> {
    let cfg = base_config(cli)?;
    let grid = grid(&cfg)?;
    check_lambda(args.lambda)?;
    let (name, built, lambda, claims) = match (&args.loss, &args.spec) {
        (Some(name), _) => {
            let ell = by_name(name)?;
            (name.clone(), Ok(ell.proper().clone()), args.lambda.or(ell.lambda()), None)
        }
        (None, Some(path)) => {
            let spec = LossSpecFile::from_path(path)?;
            let built = spec.build(grid)?;
            (spec.name.clone(), built, args.lambda.or(spec.lambda), spec.claims.clone())
        }
        (None, None) => return Err(CliError::Usage("either --loss or --spec is required".into())),
    };
    check_lambda(lambda)?;
    if let Some(claims) = &claims {
        if claims.contains(&Property::StronglyProper) && lambda.is_none() {
            return Err(CliError::Usage("strong properness is claimed but no lambda was given".into()));
        }
    }
    let (reports, built_ok) = match built {
        Ok(c) => {
            let mut reports = vec![certify_proper(&c, grid), certify_strictly_proper(&c, grid)];
            if let Some(l) = lambda {
                reports.push(certify_strongly_proper(&c, l, grid)?);
            }
            reports.push(certify_regular(&c, grid));
            (reports, true)
        }
        Err(Error::NotConcave(w)) => {
            let report = CertificationReport {
                property: Property::Proper,
                lambda: None,
                verdict: Verdict::Fail,
                witness: Some(w),
                grid_step: grid.step(),
                notes: vec!["H has a positive second difference; no loss was constructed".into()],
            };
            (vec![report], false)
        }
        Err(e) => return Err(e.into()),
    };
    let claimed = |r: &&CertificationReport| claims.as_ref().is_none_or(|c| c.contains(&r.property));
    let pass = built_ok && reports.iter().filter(claimed).all(|r| r.passed());
    let body = json!({
        "command": "certify",
        "loss": name,
        "grid_step": grid.step(),
        "lambda": lambda,
        "passed": pass,
        "reports": reports,
    });
    say!("{}", serde_json::to_string_pretty(&body).expect("report serializes"));
    if cfg.output.is_some() {
        let mut out = output_dir(&cfg)?;
        out.write_json(&format!("certify-{}.json", file_stem(&name)), &body)?;
        out.finish(json!({
            "command": "certify",
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "passed": pass,
        }))?;
    }
    Ok(Outcome::from_pass(pass))
}

fn suite_kind(s: &Suite) -> SuiteKind {
    match s {
        Suite::Main { .. } => SuiteKind::Main,
        Suite::Midpoint { .. } => SuiteKind::Midpoint,
        Suite::Plugin => SuiteKind::Plugin,
        Suite::RegretIdentity => SuiteKind::ClemenconIdentity,
        Suite::PairwiseIdentity => SuiteKind::PairwiseIdentity,
        Suite::Bartlett { .. } => SuiteKind::Bartlett,
        Suite::Kotlowski { .. } => SuiteKind::Kotlowski,
    }
}

/// The main bound for random scores on a fixed distribution.
fn fixed_distribution_reports(d: &FiniteDistribution, cfg: &ExperimentConfig) -> Result<Vec<BoundReport>, CliError> {
    let mut out = Vec::new();
    for name in &cfg.losses {
        let ell = by_name(name)?;
        for k in 0..cfg.trials {
            let mut rng = trial_rng(cfg.seed, k);
            let f = random_scores(&mut rng, d, ell.prediction_range(), ScoreStyle::Continuous);
            let mut r = match cfg.lambda {
                Some(l) => check_main_bound_with_lambda(d, &ell, &f, l)?,
                None => check_main_bound(d, &ell, &f)?,
            };
            r.bound_name = "main-fixed".into();
            out.push(r.with_seed(cfg.seed, k));
        }
    }
    Ok(out)
}

fn bound_check(cli: &Cli, args: &BoundCheckArgs) -> Result<Outcome, CliError> {
    let mut cfg = base_config(cli)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(l) = &args.losses {
        cfg.losses = l.clone();
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    if let Some(s) = &args.suites {
        cfg.suites = s.clone();
    }
    set_distribution(&mut cfg, &args.distribution)?;
    cfg.validate()?;
    check_lambda(cfg.lambda)?;
    let fixed = match cfg.distribution {
        Some(_) => Some(cfg.distribution()?),
        None => None,
    };

    let mut reports = Vec::new();
    for suite in Suite::standard(&cfg.losses, cfg.lambda) {
        if cfg.suites.contains(&suite_kind(&suite)) {
            reports.extend(suite.run(cfg.seed, cfg.trials)?);
        }
    }
    if let Some(d) = &fixed {
        if cfg.suites.contains(&SuiteKind::Main) {
            reports.extend(fixed_distribution_reports(d, &cfg)?);
        }
    }
    for r in &mut reports {
        retolerate(r, &cfg.tolerances);
    }
    let summaries = summarize(&reports);
    let violations: usize = summaries.iter().map(|s| s.violations).sum();
    for s in &summaries {
        say!(
            "{:<22} {:<10} trials {:>6}  violations {:>5}  min slack {}",
            s.bound_name,
            s.loss.as_deref().unwrap_or("-"),
            s.count,
            s.violations,
            fmt_f64(s.min_slack)
        );
    }

    let hash = cfg.hash();
    let mut out = output_dir(&cfg)?;
    let rows = reports.iter().map(|r| {
        vec![
            r.bound_name.clone(),
            r.context.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.context.trial.map(|t| t.to_string()).unwrap_or_default(),
            r.context.loss.clone().unwrap_or_default(),
            fmt_opt(r.context.p),
            fmt_opt(r.context.lambda),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.slack),
            r.holds.to_string(),
        ]
    });
    out.write_csv(
        "trials.csv",
        &["bound_name", "seed", "trial", "loss", "p", "lambda", "lhs", "rhs", "slack", "holds"],
        rows,
    )?;
    let pass = violations == 0;
    let summary = out.finish(json!({
        "command": "bound-check",
        "config_hash": hash,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "lambda": cfg.lambda,
        "passed": pass,
        "violations": violations,
        "suites": summaries,
    }))?;
    say!("summary: {}", summary.display());
    Ok(Outcome::from_pass(pass))
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Result<Outcome, CliError> {
    let mut cfg = base_config(cli)?;
    let s = &mut cfg.sweep;
    if let Some(l) = &args.loss {
        s.loss = l.clone();
    }
    if let Some(f) = args.family {
        s.family = match f {
            FamilyArg::Shrink => ScoreFamily::Shrink,
            FamilyArg::Noise => ScoreFamily::Noise,
            FamilyArg::Reverse => ScoreFamily::Reverse,
        };
    }
    if let Some(ts) = &args.ts {
        s.ts = ts.clone();
    }
    if let Some(a) = args.alpha {
        s.alpha = a;
    }
    if let Some(t) = args.t_min {
        s.t_min = t;
        s.t_grid = None;
    }
    set_distribution(&mut cfg, &args.distribution)?;
    let d = cfg.distribution()?;
    let ell = by_name(&cfg.sweep.loss)?;
    if cfg.sweep.ts.is_empty() {
        return Err(CliError::Usage("the scoring family is empty".into()));
    }
    if !(cfg.sweep.t_min > 0.0 && cfg.sweep.t_min <= 1.0) {
        return Err(CliError::Usage(format!("t_min {} is outside (0, 1]", cfg.sweep.t_min)));
    }
    let family = cfg.sweep.family.generate(&d, &ell, &cfg.sweep.ts, cfg.seed)?;
    let mut diag = low_noise_diagnostic(&d, &ell, &family, cfg.sweep.alpha, &cfg.sweep.t_grid())?;
    for p in &mut diag.points {
        retolerate(&mut p.main_bound, &cfg.tolerances);
    }
    let pass = diag.all_hold();

    let c = &diag.certificate;
    say!(
        "{}: target exponent {}  fitted slope {}",
        diag.loss,
        fmt_f64(diag.target_exponent),
        diag.fitted_slope.map(fmt_f64).unwrap_or_else(|| "none".into())
    );
    say!(
        "NA({}) certificate C = {} on t in [{}, {}] (binding at {} with t = {})",
        c.alpha,
        fmt_f64(c.constant),
        c.t_min,
        c.t_max,
        c.binding_instance,
        c.binding_t
    );
    for note in &diag.notes {
        say!("note: {note}");
    }

    let hash = cfg.hash();
    let mut out = output_dir(&cfg)?;
    let rows = diag.points.iter().map(|p| {
        vec![
            p.index.to_string(),
            fmt_f64(cfg.sweep.ts[p.index]),
            fmt_f64(p.surrogate_regret),
            fmt_f64(p.ranking_regret),
            fmt_f64(p.main_bound.rhs),
            fmt_f64(p.main_bound.slack),
            p.main_bound.holds.to_string(),
            p.fitted.to_string(),
        ]
    });
    out.write_csv(
        "sweep.csv",
        &["index", "t", "surrogate_regret", "ranking_regret", "bound_rhs", "slack", "holds", "fitted"],
        rows,
    )?;
    let summary = out.finish(json!({
        "command": "sweep",
        "config_hash": hash,
        "seed": cfg.seed,
        "loss": diag.loss,
        "family": cfg.sweep.family,
        "alpha": diag.alpha,
        "target_exponent": diag.target_exponent,
        "fitted_slope": diag.fitted_slope,
        "certificate": diag.certificate,
        "notes": diag.notes,
        "passed": pass,
    }))?;
    say!("summary: {}", summary.display());
    Ok(Outcome::from_pass(pass))
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<Outcome, CliError> {
    let mut cfg = base_config(cli)?;
    if let Some(l) = &args.losses {
        cfg.losses = l.clone();
    }
    if let Some(s) = args.steps {
        cfg.train.steps = s;
    }
    if args.learning_rate.is_some() {
        cfg.train.learning_rate = args.learning_rate;
    }
    if let Some(n) = args.sampled {
        cfg.train.mode = TrainMode::Sampled { n, seed: cfg.seed };
    }
    if let Some(r) = args.record_every {
        cfg.train.record_every = r;
    }
    set_distribution(&mut cfg, &args.distribution)?;
    cfg.validate()?;
    let d = cfg.distribution()?;
    let tol = cfg.tolerances.bound.unwrap_or(BOUND_TOLERANCE);
    let hash = cfg.hash();
    let mut out = output_dir(&cfg)?;
    let mut results = Vec::new();
    let mut pass = true;

    for name in &cfg.losses {
        let ell = by_name(name)?;
        let tc = TrainConfig {
            loss: name.clone(),
            steps: cfg.train.steps,
            learning_rate: cfg.train.learning_rate_for(name),
            mode: cfg.train.mode.clone(),
            init: cfg.train.init.clone(),
            record_every: cfg.train.record_every,
        };
        tc.validate()?;
        let traj = match fit_scores(&d, &ell, &tc) {
            Ok(t) => t,
            Err(Error::Diverged { step, trajectory, .. }) => {
                let path = out.write_json(&format!("diverged-{}.json", file_stem(name)), &trajectory)?;
                warn!("{name}: diverged at step {step}; trajectory dumped to {}", path.display());
                pass = false;
                results.push(json!({
                    "loss": name,
                    "diverged_at": step,
                    "dump": path_name(&path),
                }));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let holds = |c: &proper_rank::trainer::Checkpoint| c.bound_rhs.is_none_or(|rhs| c.ranking_regret <= rhs + tol);
        let bound_holds = traj.checkpoints.iter().all(holds);
        pass &= bound_holds;
        let rows = traj.checkpoints.iter().map(|c| {
            vec![
                c.step.to_string(),
                fmt_f64(c.surrogate_regret),
                fmt_f64(c.ranking_regret),
                fmt_opt(c.bound_rhs),
                holds(c).to_string(),
                fmt_f64(c.learning_rate),
            ]
        });
        out.write_csv(
            &format!("train-{}.csv", file_stem(name)),
            &["step", "surrogate_regret", "ranking_regret", "bound_rhs", "holds", "learning_rate"],
            rows,
        )?;
        let last = traj.last();
        let est = plugin_from_scores(&ell, &last.scores)?.aligned(&d)?;
        let errors: Vec<f64> = est.iter().zip(d.etas()).map(|(a, b)| (a - b).abs()).collect();
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        let mean_error: f64 = errors.iter().zip(d.weights()).map(|(e, w)| e * w).sum();
        say!(
            "{name:<10} step {:>6}  surrogate regret {}  ranking regret {}  max plug-in error {}  bound {}",
            last.step,
            fmt_f64(last.surrogate_regret),
            fmt_f64(last.ranking_regret),
            fmt_f64(max_error),
            if bound_holds { "holds" } else { "VIOLATED" }
        );
        results.push(json!({
            "loss": name,
            "final_step": last.step,
            "surrogate_regret": last.surrogate_regret,
            "ranking_regret": last.ranking_regret,
            "plugin_max_error": max_error,
            "plugin_mean_error": mean_error,
            "bound_holds": bound_holds,
        }));
    }
    let summary = out.finish(json!({
        "command": "train",
        "config_hash": hash,
        "seed": cfg.seed,
        "mode": cfg.train.mode,
        "steps": cfg.train.steps,
        "passed": pass,
        "losses": results,
    }))?;
    say!("summary: {}", summary.display());
    Ok(Outcome::from_pass(pass))
}

fn path_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}
