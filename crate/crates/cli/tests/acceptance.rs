//! Acceptance criteria 1 to 13, one line each.
//!
//! Runs without the libtest harness so the lines are always printed. A
//! criterion listed in `KNOWN_FAILURES` still prints FAIL; the run only exits
//! nonzero for other failures, or if a known failure starts passing.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use proper_rank::bounds::{plugin_bound, MarginLoss};
use proper_rank::construct::{
    canonical_link, certify_proper, certify_strongly_proper, from_concave_risk, strong_concavity_modulus,
    ConcaveRiskSpec, Grid,
};
use proper_rank::loss::{self, CATALOG_NAMES};
use proper_rank::trainer::{fit_by_name, gradient_check, plugin_from_scores, TrainConfig};
use proper_rank::trials::{summarize, Suite};
use proper_rank::{BinaryLoss, FiniteDistribution, Label, ProperLoss, ScoringFunction};
use rand::{Rng, SeedableRng};
use serde_json::Value;

/// The pairwise exponential regret is not bounded by 9/4 of the balanced
/// exponential regret away from the optimum (two-point counterexample:
/// mu = (1/2, 1/2), eta = (0.8, 0.2), f = (-1, 1) gives 4.41 > 3.26).
const KNOWN_FAILURES: &[u32] = &[9];

const TRIALS: usize = 1000;
const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_proper-rank")
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn c1_catalog_certification() -> Outcome {
    let start = Instant::now();
    let grid = Grid::with_points(257).unwrap();
    let mut failed = Vec::new();
    let mut min_slack = f64::INFINITY;
    for ell in loss::catalog() {
        let lambda = ell.lambda().expect("catalog losses carry lambda");
        let r = certify_strongly_proper(ell.proper(), lambda, grid).unwrap();
        min_slack = min_slack.min(r.witness.map_or(f64::INFINITY, |w| w.margin));
        if !r.passed() {
            failed.push(ell.name().to_string());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failed.is_empty() && min_slack >= -1e-9 && secs < 5.0,
        format!("7 losses at catalog lambda, min slack {min_slack:.3e}, {secs:.2} s, failed {failed:?}"),
    )
}

fn c2_modulus_recovery() -> Outcome {
    let grid = Grid::default();
    let entropy = |e: f64| {
        let t = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
        t(e) + t(1.0 - e)
    };
    let cases: [(&str, Box<dyn Fn(f64) -> f64>, f64); 4] = [
        ("exp", Box::new(|e: f64| 2.0 * (e * (1.0 - e)).sqrt()), 4.0),
        ("log", Box::new(entropy), 4.0),
        ("spher", Box::new(|e: f64| 1.0 - e.hypot(1.0 - e)), 1.0),
        ("eta(1-eta)", Box::new(|e: f64| e * (1.0 - e)), 2.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, h, want) in cases {
        let m = strong_concavity_modulus(h, grid);
        pass &= (m - want).abs() <= 0.02;
        parts.push(format!("{name} {m:.4}"));
    }
    outcome(pass, parts.join(", "))
}

fn c3_squared_identity() -> Outcome {
    let sq = loss::squared_proper();
    let grid = Grid::default();
    let mut worst: f64 = 0.0;
    for eta in grid.values() {
        for q in grid.values() {
            let l = sq.conditional_risk(eta, q).unwrap().get();
            worst = worst.max((l - sq.bayes_risk(eta) - 4.0 * (eta - q) * (eta - q)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.3e} over 257^2 points"))
}

fn c4_savage_and_link() -> Outcome {
    let grid = Grid::default();
    let h = |e: f64| 1.0 - e.hypot(1.0 - e);
    let dh = |e: f64| (1.0 - 2.0 * e) / e.hypot(1.0 - e);
    let spher = from_concave_risk("spher", &ConcaveRiskSpec::new(h, dh), grid).unwrap();
    let mut savage: f64 = 0.0;
    for q in grid.values() {
        let r = q.hypot(1.0 - q);
        let pos = spher.partial(Label::Positive, q).unwrap().get();
        let neg = spher.partial(Label::Negative, q).unwrap().get();
        savage = savage.max((pos - (1.0 - q / r)).abs()).max((neg - (1.0 - (1.0 - q) / r)).abs());
    }
    let psi = canonical_link(&loss::exponential_proper(), grid).unwrap();
    let mut link: f64 = 0.0;
    for q in grid.values().into_iter().filter(|q| *q > 0.0 && *q < 1.0) {
        let want = (2.0 * q - 1.0) / (q * (1.0 - q)).sqrt();
        link = link.max((psi.forward(q).unwrap() - want).abs());
    }
    outcome(
        savage <= 1e-12 && link <= 1e-10,
        format!("spherical partials within {savage:.3e}, canonical exp link within {link:.3e}"),
    )
}

fn violations(reports: &[proper_rank::BoundReport]) -> Vec<(String, Option<String>, usize, f64)> {
    summarize(reports)
        .into_iter()
        .map(|s| (s.bound_name, s.loss, s.violations, s.min_slack))
        .collect()
}

fn c5_main_bound() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    let mut min_slack = f64::INFINITY;
    for name in CATALOG_NAMES {
        let reports = Suite::Main {
            loss: name.into(),
            lambda: None,
        }
        .run(SEED, TRIALS)
        .unwrap();
        for (_, _, v, s) in violations(&reports) {
            total += v;
            min_slack = min_slack.min(s);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        total == 0 && secs < 60.0,
        format!("{} trials, {total} violations, min slack {min_slack:.3e}, {secs:.2} s", 7 * TRIALS),
    )
}

fn c6_regret_identity() -> Outcome {
    let reports = Suite::RegretIdentity.run(SEED, TRIALS).unwrap();
    let worst = reports.iter().map(|r| r.lhs).fold(0.0, f64::max);
    outcome(
        reports.iter().all(|r| r.holds) && worst <= 1e-12,
        format!("{TRIALS} trials (half with ties), max |direct - identity| {worst:.3e}"),
    )
}

fn c7_pairwise_reduction() -> Outcome {
    let reports = Suite::PairwiseIdentity.run(SEED, TRIALS).unwrap();
    let worst = |name: &str| {
        reports
            .iter()
            .filter(|r| r.bound_name == name)
            .map(|r| r.lhs)
            .fold(0.0, f64::max)
    };
    let (a, b) = (worst("pairwise-identity"), worst("pairwise-balance"));
    outcome(
        reports.iter().all(|r| r.holds) && a <= 1e-12 && b <= 1e-12,
        format!("{TRIALS} tie-free trials, max regret gap {a:.3e}, max |p~ - 1/2| {b:.3e}"),
    )
}

fn c8_plugin() -> Outcome {
    let reports = Suite::Plugin.run(SEED, TRIALS).unwrap();
    let clean = reports.iter().all(|r| r.holds);
    let d = FiniteDistribution::from_arrays(&[0.5, 0.5], &[0.8, 0.2]).unwrap();
    let r = plugin_bound(&d, &ScoringFunction::for_distribution(&d, &[0.2, 0.8]).unwrap()).unwrap();
    let exact = (r.lhs - 0.6).abs() <= 1e-15 && (r.rhs - 2.4).abs() <= 1e-15;
    outcome(
        clean && exact,
        format!(
            "{TRIALS} trials {}, worked example lhs {} rhs {}",
            if clean { "clean" } else { "with violations" },
            r.lhs,
            r.rhs
        ),
    )
}

fn c9_margin_bounds() -> Outcome {
    let mut reports = Vec::new();
    for loss in MarginLoss::ALL {
        reports.extend(Suite::Bartlett { loss }.run(SEED, TRIALS).unwrap());
        reports.extend(Suite::Kotlowski { loss }.run(SEED, TRIALS).unwrap());
    }
    let rows = violations(&reports);
    let pass = rows.iter().all(|r| r.2 == 0);
    let detail = rows
        .iter()
        .map(|(name, _, v, _)| format!("{name} {v}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("violations per {TRIALS} trials: {detail}"))
}

fn c10_negative_controls() -> Outcome {
    let grid = Grid::default();
    let exp16 = certify_strongly_proper(&loss::exponential_proper(), 16.0, grid).unwrap();
    let linear = certify_proper(&ProperLoss::from_partials("linear", |q| 1.0 - q, |q| q), grid);
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("linear.json");
    std::fs::write(&spec, r#"{"name": "linear", "partial_pos": "1 - x", "partial_neg": "x"}"#).unwrap();
    let (code_exp, _) = run_cli(&["certify", "--loss", "exp", "--lambda", "16"]);
    let (code_lin, _) = run_cli(&["certify", "--spec", spec.to_str().unwrap()]);
    let w = exp16.witness.unwrap();
    outcome(
        !exp16.passed() && !linear.passed() && linear.witness.is_some() && code_exp == 1 && code_lin == 1,
        format!(
            "exp at lambda 16 fails at eta {} eta_hat {} (margin {:.3}), linear fails properness, exit codes {code_exp} and {code_lin}",
            w.eta, w.eta_hat, w.margin
        ),
    )
}

fn c11_trainer() -> Outcome {
    let d = FiniteDistribution::demo();
    let traj = fit_by_name(&d, &TrainConfig::new("sq", 500, 0.1)).unwrap();
    let ell = loss::squared();
    let est = plugin_from_scores(&ell, &traj.last().scores).unwrap().aligned(&d).unwrap();
    let err = est.iter().zip(d.etas()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for ell in loss::catalog() {
        let range = ell.prediction_range();
        let points: Vec<(Label, f64)> = (0..100)
            .map(|_| {
                let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
                let y = if range.is_bounded() {
                    range.lo + (range.hi - range.lo) * rng.random_range(0.01..0.99)
                } else {
                    rng.random_range(-4.0..4.0)
                };
                (label, y)
            })
            .collect();
        worst = worst.max(gradient_check(&ell, &points, 1e-5).unwrap().max_relative_error);
    }
    outcome(
        err < 1e-6 && worst <= 1e-6,
        format!("squared loss plug-in error {err:.3e} after 500 steps, max gradient relative error {worst:.3e}"),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn c12_low_noise_substitute() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let (code, _) = run_cli(&["sweep", "--out", out.to_str().unwrap(), "--alpha", "0", "--t-min", "0.05"]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap_or_default();
    let rows = csv.lines().skip(1).count();
    let has_columns = csv.starts_with("index,t,surrogate_regret,ranking_regret,");
    let summary = read_json(&out.join("summary.json"));
    let slope = summary["fitted_slope"].as_f64();
    let cert = &summary["certificate"];
    let scoped = cert["t_min"].as_f64() == Some(0.05) && cert["t_max"].as_f64() == Some(1.0);
    let all_hold = csv.lines().skip(1).all(|l| l.split(',').nth(6) == Some("true"));
    outcome(
        code == 0 && has_columns && rows > 0 && slope.is_some() && scoped && all_hold,
        format!(
            "{rows} points, slope {:.4} vs exponent 1/2, NA(0) C = {} on [{}, {}], every point within the alpha = 0 bound: {all_hold}",
            slope.unwrap_or(f64::NAN),
            cert["constant"],
            cert["t_min"],
            cert["t_max"]
        ),
    )
}

fn c13_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut same = true;
    let runs: [(&str, &[&str], &str); 3] = [
        ("bound-check", &["bound-check", "--seed", "7"], "trials.csv"),
        ("train", &["train", "--seed", "7", "--losses", "log", "--sampled", "10000"], "train-log.csv"),
        ("sweep", &["sweep", "--seed", "7"], "sweep.csv"),
    ];
    for (name, args, file) in runs {
        let mut bytes = Vec::new();
        for k in 0..2 {
            let dir = tmp.path().join(format!("{name}-{k}"));
            let mut full: Vec<&str> = args.to_vec();
            let d = dir.to_str().unwrap().to_string();
            full.extend(["--out", &d]);
            run_cli(&full);
            bytes.push(std::fs::read(dir.join(file)).unwrap_or_default());
        }
        same &= !bytes[0].is_empty() && bytes[0] == bytes[1];
    }
    outcome(same, "bound-check, sampled train and sweep CSVs byte-identical across two runs")
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 13] = [
        (1, "catalog certification", c1_catalog_certification),
        (2, "modulus recovery", c2_modulus_recovery),
        (3, "squared loss identity", c3_squared_identity),
        (4, "Savage construction and canonical link", c4_savage_and_link),
        (5, "strongly proper ranking bound", c5_main_bound),
        (6, "ranking regret identity", c6_regret_identity),
        (7, "pairwise reduction", c7_pairwise_reduction),
        (8, "plug-in bound", c8_plugin),
        (9, "Bartlett and balanced-loss bounds", c9_margin_bounds),
        (10, "negative controls", c10_negative_controls),
        (11, "trainer", c11_trainer),
        (12, "low-noise diagnostics", c12_low_noise_substitute),
        (13, "determinism", c13_determinism),
    ];
    let mut unexpected = Vec::new();
    for (k, name, check) in criteria {
        let o = check();
        let known = KNOWN_FAILURES.contains(&k);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {k:>2}: {tag}: {name}: {}", o.detail);
        if o.pass == known {
            unexpected.push(k);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
