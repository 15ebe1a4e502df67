//! Violation-rate and tail-curve estimation over many simulated trajectories.
//!
//! Every trajectory is an independent task keyed by its index, so callers
//! may evaluate [`run_trajectory`] in any order or in parallel and feed the
//! collected outcomes to [`summarize`] or [`tail_curve`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::E;

use crate::boundary::{
    accumulate_stats, huang_tail, BoundaryParams, BoundaryTable, CumulativeStats, SmoothVariant,
    StepSchedule,
};
use crate::error::{Error, Result};
use crate::oracle::sandwich_violation;
use crate::streams::{trajectory_seed, MatrixDistribution, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryVariant {
    /// Epoch-stitched anytime boundary.
    Epoch,
    SmoothPaper,
    SmoothDominating,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub distribution: MatrixDistribution,
    pub schedule: StepSchedule,
    pub params: BoundaryParams,
    pub n_max: usize,
    pub trajectories: u64,
    pub master_seed: u64,
    pub variant: BoundaryVariant,
    /// Multiplier on the boundary; 1 except for negative controls.
    pub boundary_scale: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.schedule.validate()?;
        if self.trajectories == 0 {
            return Err(Error::Domain {
                name: "trajectories",
                value: 0.0,
                expected: "trajectories >= 1",
            });
        }
        if self.n_max == 0 {
            return Err(Error::Domain {
                name: "n_max",
                value: 0.0,
                expected: "n_max >= 1",
            });
        }
        if !(self.boundary_scale >= 0.0) {
            return Err(Error::Domain {
                name: "boundary_scale",
                value: self.boundary_scale,
                expected: "boundary_scale >= 0",
            });
        }
        if self.params.d != self.distribution.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.distribution.dim(),
                found: self.params.d,
            });
        }
        Ok(())
    }

    pub fn boundary_table(&self) -> Result<BoundaryTable> {
        self.validate()?;
        BoundaryTable::new(self.n_max, &self.schedule, &self.params)
    }

    /// Scaled thresholds for `n = 1..=n_max` (index `n - 1`).
    pub fn thresholds(&self, table: &BoundaryTable) -> Vec<f64> {
        (1..=self.n_max)
            .map(|n| {
                let b = match self.variant {
                    BoundaryVariant::Epoch => table.anytime(n),
                    BoundaryVariant::SmoothPaper => table.smooth(n, SmoothVariant::Paper),
                    BoundaryVariant::SmoothDominating => table.smooth(n, SmoothVariant::Dominating),
                };
                b.value * self.boundary_scale
            })
            .collect()
    }
}

/// Per-trajectory summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutcome {
    pub index: u64,
    pub first_crossing: Option<usize>,
    pub max_dev: f64,
    pub max_ydev: f64,
    /// `max_n dev_n / boundary_n` (infinite where a boundary is zero and dev positive).
    pub max_ratio: f64,
    /// Worst relative violation of `‖Y_n‖ ≤ ‖Z_n − E_n‖ ≤ ‖E_n‖ ‖Y_n‖`.
    pub sandwich: f64,
}

/// Simulates trajectory `index` against precomputed thresholds.
pub fn run_trajectory(cfg: &ExperimentConfig, thresholds: &[f64], index: u64) -> Result<TrajectoryOutcome> {
    let seed = trajectory_seed(cfg.master_seed, index);
    let mut sim = Simulator::new(&cfg.distribution, &cfg.schedule, seed).without_sigma_obs();
    let mut out = TrajectoryOutcome {
        index,
        first_crossing: None,
        max_dev: 0.0,
        max_ydev: 0.0,
        max_ratio: 0.0,
        sandwich: f64::NEG_INFINITY,
    };
    for n in 1..=cfg.n_max {
        let s = sim.step(thresholds[n - 1])?;
        if s.crossed && out.first_crossing.is_none() {
            out.first_crossing = Some(n);
        }
        out.max_dev = out.max_dev.max(s.dev);
        out.max_ydev = out.max_ydev.max(s.ydev);
        if s.dev > 0.0 {
            out.max_ratio = out.max_ratio.max(s.dev / s.boundary);
        }
        out.sandwich = out.sandwich.max(sandwich_violation(s.ydev, s.dev, s.expected_norm));
    }
    Ok(out)
}

/// Estimated `P(∃ n ≤ n_max : dev_n ≥ boundary_n)`.
///
/// The event is truncated at `n_max`, so the rate is a lower bound on the
/// infinite-horizon probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub trajectories: u64,
    pub violations: u64,
    pub rate: f64,
    /// Clopper–Pearson 95% interval.
    pub ci95: (f64, f64),
    pub delta: f64,
    pub n_max: usize,
    /// Step-size condition at the last epoch endpoint.
    pub condition2_ok: bool,
    /// Same condition with `δ/h(k)` at every touched epoch endpoint.
    pub condition2_epochwise_ok: bool,
    /// First crossings per epoch `k`.
    pub epoch_histogram: Vec<u64>,
    pub max_sandwich_violation: f64,
}

pub fn summarize(cfg: &ExperimentConfig, table: &BoundaryTable, outcomes: &[TrajectoryOutcome]) -> ViolationReport {
    let epochs = table.epoch(cfg.n_max) + 1;
    let mut histogram = vec![0u64; epochs];
    let mut violations = 0u64;
    let mut sandwich = f64::NEG_INFINITY;
    for o in outcomes {
        if let Some(n) = o.first_crossing {
            violations += 1;
            histogram[table.epoch(n)] += 1;
        }
        sandwich = sandwich.max(o.sandwich);
    }
    let trajectories = outcomes.len() as u64;
    ViolationReport {
        trajectories,
        violations,
        rate: violations as f64 / trajectories as f64,
        ci95: clopper_pearson(violations, trajectories, 0.95),
        delta: cfg.params.delta,
        n_max: cfg.n_max,
        condition2_ok: table.condition_at_last_endpoint(),
        condition2_epochwise_ok: table.condition_epochwise(),
        epoch_histogram: histogram,
        max_sandwich_violation: sandwich,
    }
}

/// Runs every trajectory in index order.
pub fn run_all(cfg: &ExperimentConfig) -> Result<(BoundaryTable, Vec<TrajectoryOutcome>)> {
    let table = cfg.boundary_table()?;
    let thresholds = cfg.thresholds(&table);
    let outcomes = (0..cfg.trajectories)
        .map(|i| run_trajectory(cfg, &thresholds, i))
        .collect::<Result<Vec<_>>>()?;
    Ok((table, outcomes))
}

pub fn estimate_violation_rate(cfg: &ExperimentConfig) -> Result<ViolationReport> {
    let (table, outcomes) = run_all(cfg)?;
    Ok(summarize(cfg, &table, &outcomes))
}

/// One grid point of the running-maximum tail of `‖Y_k‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub u: f64,
    pub hits: u64,
    /// Empirical `P(max_{k≤n} ‖Y_k‖ ≥ u M_n)`.
    pub empirical: f64,
    /// `min(1, huang_tail(u))`.
    pub bound: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub fn tail_curve(
    outcomes: &[TrajectoryOutcome],
    stats: &CumulativeStats,
    d: usize,
    u_grid: &[f64],
) -> Result<Vec<TailPoint>> {
    let total = outcomes.len() as u64;
    u_grid
        .iter()
        .map(|&u| {
            let bound = huang_tail(u, stats, d)?.min(1.0);
            let level = u * stats.growth;
            let hits = outcomes.iter().filter(|o| o.max_ydev >= level).count() as u64;
            let (ci_lo, ci_hi) = clopper_pearson(hits, total, 0.95);
            Ok(TailPoint {
                u,
                hits,
                empirical: hits as f64 / total as f64,
                bound,
                ci_lo,
                ci_hi,
            })
        })
        .collect()
}

pub fn empirical_tail_curve(cfg: &ExperimentConfig, u_grid: &[f64]) -> Result<Vec<TailPoint>> {
    for &u in u_grid {
        huang_tail(u, &CumulativeStats::INITIAL, 1)?;
    }
    let (table, outcomes) = run_all(cfg)?;
    tail_curve(&outcomes, table.stats(cfg.n_max), cfg.params.d, u_grid)
}

/// Fixed-time versus anytime thresholds under `η_i = 1/n`, `i ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Remark2Record {
    /// `e M_n sqrt(2 V_n ln(d/δ))`.
    pub t_fixed: f64,
    /// `e ‖E_n‖ M_n sqrt(2 V_n ln(d/δ))`.
    pub t_anytime: f64,
    /// `t_fixed / e`; tends to `L e^μ sqrt(2 ln(d/δ)/n)`.
    pub t_fixed_order: f64,
    /// `t_anytime / e`; tends to `L e^{2μ} sqrt(2 ln(d/δ)/n)`.
    pub t_anytime_order: f64,
    /// `t_anytime / t_fixed = ‖E_n‖ = (1 + μ/n)^n`.
    pub ratio: f64,
    pub e_mu: f64,
    pub e_2mu: f64,
}

pub fn remark2_comparison(mu: f64, l: f64, d: usize, delta: f64, n: usize) -> Result<Remark2Record> {
    let params = BoundaryParams::new(delta, d, l, 2.0, 2.0, mu)?;
    if n == 0 {
        return Err(Error::Domain {
            name: "n",
            value: 0.0,
            expected: "n >= 1",
        });
    }
    let schedule = StepSchedule::FixedHorizon { c: 1.0, horizon: n };
    let mut s = CumulativeStats::INITIAL;
    for i in 1..=n {
        s = accumulate_stats(s, schedule.eta(i)?, &params);
    }
    let core = s.growth * libm::sqrt(2.0 * s.variance * libm::log(d as f64 / delta));
    let t_fixed = E * core;
    let t_anytime = E * s.expected_norm * core;
    Ok(Remark2Record {
        t_fixed,
        t_anytime,
        t_fixed_order: core,
        t_anytime_order: s.expected_norm * core,
        ratio: s.expected_norm,
        e_mu: libm::exp(mu),
        e_2mu: libm::exp(2.0 * mu),
    })
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `p` with `I_p(a, b) = target`, by bisection.
fn beta_inc_inverse(a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_inc(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Clopper–Pearson exact binomial interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        beta_inc_inverse(x, n - x + 1.0, alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        beta_inc_inverse(x + 1.0, n - x, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}
