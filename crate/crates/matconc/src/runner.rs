//! Trajectory-parallel execution on a dedicated rayon pool.
//!
//! Trajectory `i` depends only on `(master_seed, i)` and results are
//! collected in index order, so output does not depend on the thread count.

use matconc_core::boundary::BoundaryTable;
use matconc_core::montecarlo::{run_trajectory, ExperimentConfig, TrajectoryOutcome};
use rayon::prelude::*;

use crate::error::CliError;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "MATCONC_THREADS";

/// `MATCONC_THREADS` if set, else the available parallelism.
pub fn default_threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Env {
                name: THREADS_ENV,
                value: v,
            }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run_outcomes(
    cfg: &ExperimentConfig,
    thresholds: &[f64],
    threads: usize,
) -> Result<Vec<TrajectoryOutcome>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let outcomes = pool.install(|| {
        (0..cfg.trajectories)
            .into_par_iter()
            .map(|i| run_trajectory(cfg, thresholds, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(outcomes)
}

/// Boundary table plus every trajectory outcome, in index order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(BoundaryTable, Vec<TrajectoryOutcome>), CliError> {
    let table = cfg.boundary_table()?;
    let thresholds = cfg.thresholds(&table);
    let outcomes = run_outcomes(cfg, &thresholds, threads)?;
    Ok((table, outcomes))
}
