//! Oja's streaming PCA iterate, run on the same stream as the matrix
//! product so that its alignment error can be reported next to the
//! product's deviation and boundary.
//!
//! The pairing is descriptive: nothing here certifies the PCA error.

use alloc::vec::Vec;

use crate::boundary::{epoch_index, epoch_endpoint, BoundaryParams, BoundaryTable, StepSchedule};
use crate::error::{Error, Result};
use crate::streams::{stream_rng, unit_sphere, MatrixDistribution, Simulator};

/// Minimum gap `λ_1 − λ_2` for the top eigenvector to be well defined.
pub const MIN_SPECTRAL_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OjaState {
    /// Unit vector.
    pub w: Vec<f64>,
    pub n: usize,
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

impl OjaState {
    /// Starts from `w / ‖w‖`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidConfig("initial Oja vector must be nonzero".into()));
        }
        Ok(Self { w: normalize(w), n: 0 })
    }

    /// `e_1 = (1, 0, …, 0)`.
    pub fn basis(dim: usize) -> Self {
        let mut w = alloc::vec![0.0; dim];
        w[0] = 1.0;
        Self { w, n: 0 }
    }
}

/// `w ← (I + η x xᵀ) w / ‖(I + η x xᵀ) w‖`.
pub fn oja_step(state: &OjaState, x: &[f64], eta: f64) -> OjaState {
    assert_eq!(state.w.len(), x.len());
    let proj: f64 = x.iter().zip(&state.w).map(|(a, b)| a * b).sum();
    let w = state.w.iter().zip(x).map(|(w, x)| w + eta * proj * x).collect();
    OjaState {
        w: normalize(w),
        n: state.n + 1,
    }
}

/// `sin²∠(w, v) = 1 − (w·v)²` for unit `w`, `v`.
pub fn sin2_error(w: &[f64], v: &[f64]) -> f64 {
    let c: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    (1.0 - c * c).max(0.0)
}

/// Runs Oja over an explicit vector stream; returns `sin²` error per step.
pub fn run_oja<'x>(
    init: OjaState,
    stream: impl IntoIterator<Item = &'x [f64]>,
    schedule: &StepSchedule,
    target: &[f64],
) -> Result<Vec<f64>> {
    let mut state = init;
    let mut errors = Vec::new();
    for x in stream {
        let eta = schedule.eta(state.n + 1)?;
        state = oja_step(&state, x, eta);
        errors.push(sin2_error(&state.w, target));
    }
    Ok(errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OjaInit {
    Basis,
    /// Uniform on the sphere from the given seed.
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OjaPoint {
    pub n: usize,
    pub sin2_error: f64,
    /// `‖Z_n − E_n‖` on the same stream.
    pub dev: f64,
    /// Anytime boundary; NaN where the schedule ends before the epoch does.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OjaDemo {
    pub initial_sin2_error: f64,
    pub series: Vec<OjaPoint>,
}

/// Oja's iterate and the product deviation on one rank-one stream.
pub fn run_oja_demo(
    dist: &MatrixDistribution,
    schedule: &StepSchedule,
    params: &BoundaryParams,
    n_max: usize,
    seed: u64,
    init: OjaInit,
) -> Result<OjaDemo> {
    if !dist.is_rank_one() {
        return Err(Error::InvalidDistribution(
            "the Oja demo needs a rank-one (rank_one_sphere) source".into(),
        ));
    }
    let spectrum = dist.mean_spectrum();
    let d = spectrum.dim();
    if d >= 2 {
        let gap = spectrum.eigenvalues[0] - spectrum.eigenvalues[1];
        if gap < MIN_SPECTRAL_GAP {
            return Err(Error::DegenerateTopEigenvalue { gap });
        }
    }
    let v1 = spectrum.eigenvector(0);

    // Cover as many steps as the schedule allows.
    let covered = match schedule.horizon() {
        None => n_max,
        Some(h) => (1..=n_max)
            .rev()
            .find(|&n| epoch_endpoint(epoch_index(n, params.eta_epoch), params.eta_epoch) <= h)
            .unwrap_or(0),
    };
    let table = if covered > 0 {
        Some(BoundaryTable::new(covered, schedule, params)?)
    } else {
        None
    };

    let mut state = match init {
        OjaInit::Basis => OjaState::basis(d),
        OjaInit::Random(s) => OjaState::new(unit_sphere(&mut stream_rng(s), d))?,
    };
    let initial_sin2_error = sin2_error(&state.w, &v1);
    let mut sim = Simulator::new(dist, schedule, seed).without_sigma_obs();
    let mut series = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let boundary = match &table {
            Some(t) if n <= covered => t.anytime(n).value,
            _ => f64::NAN,
        };
        let rec = sim.step(boundary)?;
        let x = sim
            .last_sample()
            .and_then(|s| s.factor.as_deref())
            .expect("rank-one samples carry their factor");
        state = oja_step(&state, x, rec.eta);
        series.push(OjaPoint {
            n,
            sin2_error: sin2_error(&state.w, &v1),
            dev: rec.dev,
            boundary,
        });
    }
    Ok(OjaDemo {
        initial_sin2_error,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use alloc::vec;

    #[test]
    fn zero_step_is_identity() {
        let s = OjaState::new(vec![0.6, 0.8]).unwrap();
        assert_eq!(oja_step(&s, &[3.0, -1.0], 0.0).w, s.w);
    }

    #[test]
    fn parallel_data_is_fixed_point() {
        let s = OjaState::new(vec![0.6, 0.8]).unwrap();
        let next = oja_step(&s, &[0.6, 0.8], 1.0);
        assert!((next.w[0] - 0.6).abs() < 1e-15 && (next.w[1] - 0.8).abs() < 1e-15);
        assert_eq!(next.n, 1);
    }

    #[test]
    fn orthogonal_data_leaves_w() {
        let s = OjaState::basis(2);
        for eta in [0.1, 1.0, 50.0] {
            assert_eq!(oja_step(&s, &[0.0, 1.0], eta).w, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn stays_on_sphere() {
        let mut s = OjaState::new(vec![1.0, 2.0, 3.0]).unwrap();
        let xs = [[0.3, -1.0, 2.0], [5.0, 0.1, 0.0], [-1.0, -1.0, 1.0]];
        for i in 0..300 {
            s = oja_step(&s, &xs[i % 3], 0.37);
            let norm: f64 = s.w.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_top_direction_converges() {
        let v1 = [core::f64::consts::FRAC_1_SQRT_2, core::f64::consts::FRAC_1_SQRT_2];
        let stream = vec![&v1[..]; 40];
        let errs = run_oja(OjaState::basis(2), stream, &StepSchedule::Constant { c: 0.5 }, &v1).unwrap();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs.last().unwrap() < &1e-12);
    }

    #[test]
    fn zero_schedule_keeps_error() {
        let dist = MatrixDistribution::rank_one_sphere(SymMatrix::from_diagonal(&[1.0, 0.5])).unwrap();
        let params = BoundaryParams::new(0.1, 2, dist.deviation_bound().0, 2.0, 2.0, 1.0).unwrap();
        let demo = run_oja_demo(&dist, &StepSchedule::Constant { c: 0.0 }, &params, 30, 3, OjaInit::Random(8)).unwrap();
        assert!(demo.series.iter().all(|p| p.sin2_error == demo.initial_sin2_error));
    }

    #[test]
    fn degenerate_and_wrong_sources() {
        let iso = MatrixDistribution::rank_one_sphere(SymMatrix::identity(2)).unwrap();
        let params = BoundaryParams::new(0.1, 2, 3.0, 2.0, 2.0, 1.0).unwrap();
        let sched = StepSchedule::Constant { c: 0.01 };
        assert!(matches!(
            run_oja_demo(&iso, &sched, &params, 5, 0, OjaInit::Basis),
            Err(Error::DegenerateTopEigenvalue { .. })
        ));
        let pert = MatrixDistribution::diagonal_perturbation(SymMatrix::from_diagonal(&[2.0, 1.0]), 0.5).unwrap();
        assert!(run_oja_demo(&pert, &sched, &params, 5, 0, OjaInit::Basis).is_err());
    }

    #[test]
    fn boundary_nan_past_schedule() {
        let dist = MatrixDistribution::rank_one_sphere(SymMatrix::from_diagonal(&[1.0, 0.5])).unwrap();
        let params = BoundaryParams::new(0.1, 2, dist.deviation_bound().0, 2.0, 2.0, 1.0).unwrap();
        let sched = StepSchedule::FixedHorizon { c: 1.0, horizon: 20 };
        let demo = run_oja_demo(&dist, &sched, &params, 20, 1, OjaInit::Basis).unwrap();
        // Epoch [8, 16] fits the horizon; [16, 32] for n = 17..20 does not.
        assert!(demo.series[15].boundary.is_finite());
        assert!(demo.series[16].boundary.is_nan());
    }
}
