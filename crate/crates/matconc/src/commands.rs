//! The five subcommands. Each returns its CSV files and a text summary;
//! [`Report::write`] puts the files on disk.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use matconc_core::boundary::{epoch_bounds, SmoothVariant};
use matconc_core::montecarlo::{summarize, tail_curve, BoundaryVariant, ExperimentConfig};
use matconc_core::oja::run_oja_demo;
use matconc_core::oracle::{
    enumerate, exact_crossing_probability, martingale_check, sandwich_check, submartingale_check, CrossingMode,
};

use crate::config::Resolved;
use crate::csv::{CsvTable, Field};
use crate::error::CliError;
use crate::runner::{run_experiment, run_outcomes};

pub const MARTINGALE_TOLERANCE: f64 = 1e-10;
pub const SUBMARTINGALE_TOLERANCE: f64 = 1e-10;
pub const SANDWICH_TOLERANCE: f64 = 1e-9;

/// Output of one subcommand.
#[derive(Debug, Clone, Default)]
pub struct Report {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub summary: String,
    pub warnings: Vec<String>,
    /// True when a verification check failed.
    pub failed: bool,
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        if self.files.is_empty() {
            return Ok(());
        }
        fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

fn condition_warning(cfg: &ExperimentConfig, ok: bool, n: usize) -> Option<String> {
    (!ok).then(|| {
        format!(
            "step-size condition fails at the last epoch endpoint for n = {n} (delta = {}); \
             boundary values are reported but carry no guarantee",
            cfg.params.delta
        )
    })
}

/// Boundary table for `n = 1..=n_max` (unscaled).
pub fn cmd_boundary(r: &Resolved) -> Result<Report, CliError> {
    let cfg = &r.experiment;
    let table = cfg.boundary_table()?;
    let mut csv = CsvTable::new(
        &r.hash,
        &["n", "k_n", "M_n", "V_n", "t_fixed", "b_anytime", "f_paper", "f_dominating", "condition2_ok"],
    );
    for n in 1..=cfg.n_max {
        let stats = table.stats(n);
        let anytime = table.anytime(n);
        csv.row(&[
            n.into(),
            table.epoch(n).into(),
            stats.growth.into(),
            stats.variance.into(),
            table.fixed(n).into(),
            anytime.value.into(),
            table.smooth(n, SmoothVariant::Paper).value.into(),
            table.smooth(n, SmoothVariant::Dominating).value.into(),
            anytime.condition_ok.into(),
        ]);
    }
    let ok = table.condition_at_last_endpoint();
    let summary = format!(
        "boundary table: n = 1..{} (last epoch endpoint {}), condition2 at endpoint: {}\n",
        cfg.n_max,
        table.last_endpoint(),
        if ok { "ok" } else { "FAILS" }
    );
    Ok(Report {
        files: vec![("boundary.csv".into(), csv.finish())],
        summary,
        warnings: condition_warning(cfg, ok, cfg.n_max).into_iter().collect(),
        failed: false,
    })
}

/// Violation-rate estimate with per-trajectory and per-epoch CSVs.
pub fn cmd_simulate(r: &Resolved, threads: usize) -> Result<Report, CliError> {
    let cfg = &r.experiment;
    let (table, outcomes) = run_experiment(cfg, threads)?;
    let report = summarize(cfg, &table, &outcomes);

    let mut traj = CsvTable::new(
        &r.hash,
        &["index", "first_crossing", "max_dev", "max_ydev", "max_ratio", "sandwich"],
    );
    for o in &outcomes {
        traj.row(&[
            o.index.into(),
            // 0 marks "never crossed"; steps are numbered from 1.
            o.first_crossing.unwrap_or(0).into(),
            o.max_dev.into(),
            o.max_ydev.into(),
            o.max_ratio.into(),
            o.sandwich.into(),
        ]);
    }
    let mut epochs = CsvTable::new(&r.hash, &["k", "lower", "upper", "first_crossings"]);
    for (k, &count) in report.epoch_histogram.iter().enumerate() {
        let (lower, upper) = epoch_bounds(k, cfg.params.eta_epoch);
        epochs.row(&[k.into(), lower.into(), upper.into(), count.into()]);
    }

    let mut s = String::new();
    let _ = writeln!(s, "trajectories: {}", report.trajectories);
    let _ = writeln!(s, "violations: {}", report.violations);
    let _ = writeln!(s, "rate: {:.6}", report.rate);
    let _ = writeln!(s, "ci95 (Clopper-Pearson): [{:.6}, {:.6}]", report.ci95.0, report.ci95.1);
    let _ = writeln!(s, "delta: {}", report.delta);
    let _ = writeln!(s, "condition2_ok (last epoch endpoint): {}", report.condition2_ok);
    let _ = writeln!(s, "condition2_ok (every epoch, delta/h(k)): {}", report.condition2_epochwise_ok);
    let _ = writeln!(s, "max sandwich violation: {:e}", report.max_sandwich_violation);
    let _ = writeln!(
        s,
        "note: crossings are counted for n <= {} only; the rate is a lower bound on the all-time probability",
        report.n_max
    );
    Ok(Report {
        files: vec![
            ("trajectories.csv".into(), traj.finish()),
            ("epochs.csv".into(), epochs.finish()),
        ],
        summary: s,
        warnings: condition_warning(cfg, report.condition2_ok, cfg.n_max).into_iter().collect(),
        failed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn judged(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Exact checks by path enumeration, plus Monte Carlo against the oracle.
pub fn verify_checks(r: &Resolved, threads: usize) -> Result<(Vec<Check>, Vec<String>), CliError> {
    let base = &r.experiment;
    if base.distribution.atoms().is_none() {
        return Err(CliError::Config {
            path: "distribution.kind".into(),
            message: "verify needs kind = \"finite_support\" for exact enumeration".into(),
        });
    }
    let n = r.raw.verify.n.unwrap_or(base.n_max);
    let cfg = ExperimentConfig {
        n_max: n,
        ..base.clone()
    };
    let (dist, schedule) = (&cfg.distribution, &cfg.schedule);
    let table = cfg.boundary_table()?;
    let thresholds = cfg.thresholds(&table);
    let paths = enumerate(dist, schedule, n)?;
    let mut checks = Vec::new();
    let mut notes = Vec::new();

    let residual = martingale_check(dist, schedule, n)?;
    checks.push(judged(
        "martingale",
        residual <= MARTINGALE_TOLERANCE,
        format!("max residual {residual:e} (tolerance {MARTINGALE_TOLERANCE:e})"),
    ));
    let slack = submartingale_check(dist, schedule, n)?;
    checks.push(judged(
        "submartingale",
        slack >= -SUBMARTINGALE_TOLERANCE,
        format!("min slack {slack:e} (tolerance -{SUBMARTINGALE_TOLERANCE:e})"),
    ));
    let sandwich = sandwich_check(dist, schedule, n)?;
    checks.push(judged(
        "sandwich",
        sandwich <= SANDWICH_TOLERANCE,
        format!("worst relative violation {sandwich:e} (tolerance {SANDWICH_TOLERANCE:e})"),
    ));

    let exact = exact_crossing_probability(&paths, &thresholds, CrossingMode::Anytime)?;
    notes.push(format!(
        "exact anytime crossing probability for n <= {n} (boundary scale {}): {exact}",
        cfg.boundary_scale
    ));
    let delta = cfg.params.delta;
    let soundness = if cfg.variant == BoundaryVariant::SmoothPaper {
        Check {
            name: "soundness",
            status: Status::Skip,
            detail: "smooth_paper boundary carries no guarantee".into(),
        }
    } else if !table.condition_at_last_endpoint() {
        Check {
            name: "soundness",
            status: Status::Skip,
            detail: format!("step-size condition fails at the last epoch endpoint; crossing probability {exact}"),
        }
    } else {
        judged(
            "soundness",
            exact <= delta,
            format!("exact crossing probability {exact} vs delta {delta}"),
        )
    };
    checks.push(soundness);

    if let Some(t) = r.raw.verify.fixed_threshold {
        let mut fixed = vec![f64::INFINITY; n];
        fixed[n - 1] = t;
        let p = exact_crossing_probability(&paths, &fixed, CrossingMode::FixedTime)?;
        notes.push(format!("exact fixed-time crossing probability P(dev_{n} >= {t}) = {p}"));
    }

    let trials = r.raw.verify.mc_trajectories;
    if trials == 0 {
        checks.push(Check {
            name: "mc_vs_oracle",
            status: Status::Skip,
            detail: "verify.mc_trajectories = 0".into(),
        });
    } else {
        let mc_cfg = ExperimentConfig {
            trajectories: trials,
            ..cfg.clone()
        };
        let outcomes = run_outcomes(&mc_cfg, &thresholds, threads)?;
        let hits = outcomes.iter().filter(|o| o.first_crossing.is_some()).count();
        let rate = hits as f64 / trials as f64;
        let band = 3.0 * (exact * (1.0 - exact) / trials as f64).sqrt();
        checks.push(judged(
            "mc_vs_oracle",
            (rate - exact).abs() <= band + 1e-12,
            format!("Monte Carlo rate {rate} over {trials} trajectories vs exact {exact} (3 sigma = {band:e})"),
        ));
    }
    Ok((checks, notes))
}

pub fn cmd_verify(r: &Resolved, threads: usize) -> Result<Report, CliError> {
    let (checks, notes) = verify_checks(r, threads)?;
    let mut s = String::new();
    for c in &checks {
        let _ = writeln!(s, "{} {}: {}", c.status, c.name, c.detail);
    }
    for n in &notes {
        let _ = writeln!(s, "{n}");
    }
    Ok(Report {
        files: Vec::new(),
        summary: s,
        warnings: Vec::new(),
        failed: checks.iter().any(|c| c.status == Status::Fail),
    })
}

/// Empirical running-maximum tail of `‖Y_k‖` against the analytic bound.
pub fn cmd_tail(r: &Resolved, threads: usize) -> Result<Report, CliError> {
    let cfg = &r.experiment;
    let (table, outcomes) = run_experiment(cfg, threads)?;
    let stats = table.stats(cfg.n_max);
    let curve = tail_curve(&outcomes, stats, cfg.params.d, &r.raw.tail.u_grid)?;
    let mut csv = CsvTable::new(&r.hash, &["u", "empirical", "bound", "ci_lo", "ci_hi"]);
    let mut s = String::new();
    let _ = writeln!(s, "tail of max_k ||Y_k|| / M_n at n = {} over {} trajectories", cfg.n_max, outcomes.len());
    for p in &curve {
        csv.row(&[p.u.into(), p.empirical.into(), p.bound.into(), p.ci_lo.into(), p.ci_hi.into()]);
        let _ = writeln!(s, "u = {:.4}: empirical {:.6} [{:.6}, {:.6}], bound {:.6}", p.u, p.empirical, p.ci_lo, p.ci_hi, p.bound);
    }
    let ok = table.condition(cfg.n_max);
    Ok(Report {
        files: vec![("tail.csv".into(), csv.finish())],
        summary: s,
        warnings: condition_warning(cfg, ok, cfg.n_max).into_iter().collect(),
        failed: false,
    })
}

/// Oja's iterate alongside the product deviation on one stream.
pub fn cmd_oja(r: &Resolved) -> Result<Report, CliError> {
    let cfg = &r.experiment;
    let demo = run_oja_demo(
        &cfg.distribution,
        &cfg.schedule,
        &cfg.params,
        cfg.n_max,
        cfg.master_seed,
        r.oja_init(),
    )?;
    let mut csv = CsvTable::new(&r.hash, &["n", "sin2_error", "dev", "boundary"]);
    for p in &demo.series {
        csv.row(&[p.n.into(), p.sin2_error.into(), p.dev.into(), Field::Float(p.boundary)]);
    }
    let last = demo.series.last().map_or(demo.initial_sin2_error, |p| p.sin2_error);
    let mut s = String::new();
    let _ = writeln!(s, "initial sin^2 error: {:e}", demo.initial_sin2_error);
    let _ = writeln!(s, "final sin^2 error (n = {}): {:e}", cfg.n_max, last);
    let _ = writeln!(s, "note: the boundary column bounds ||Z_n - E_n||; it does not certify the PCA error");
    let mut warnings = Vec::new();
    if let Some(p) = demo.series.iter().find(|p| p.boundary.is_nan()) {
        warnings.push(format!(
            "schedule ends before the epoch containing n = {}; boundary reported as NaN from there on",
            p.n
        ));
    }
    Ok(Report {
        files: vec![("oja.csv".into(), csv.finish())],
        summary: s,
        warnings,
        failed: false,
    })
}
