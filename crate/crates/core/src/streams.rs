//! I.i.d. PSD matrix streams and trajectory simulation of
//! `Z_n = (I + η_n X_n) ⋯ (I + η_1 X_1)`.
//!
//! Trajectory `i` of an experiment seeded with `master_seed` draws from
//! xoshiro256++ whose state is expanded by SplitMix64 from
//! `master_seed ^ i`, so every trajectory is reproducible on its own.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::boundary::StepSchedule;
use crate::error::{Error, Result};
use crate::linalg::{
    left_accumulate, operator_norm, sym_eigen, sym_operator_norm, ExpectedProduct, Spectrum,
    SquareMatrix, SymMatrix,
};

/// PSD tolerance on the minimum eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Tolerance on the total probability of a finite-support distribution.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

pub type StreamRng = Xoshiro256PlusPlus;

/// RNG for one stream seed.
pub fn stream_rng(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Stream seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ index
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fills `out` with standard normals by Box–Muller.
fn fill_normals(rng: &mut impl RngCore, out: &mut [f64]) {
    let mut chunks = out.chunks_mut(2);
    for pair in &mut chunks {
        // (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - unit_f64(rng);
        let u2 = unit_f64(rng);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * PI * u2);
        pair[0] = r * c;
        if pair.len() == 2 {
            pair[1] = r * s;
        }
    }
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn unit_sphere(rng: &mut impl RngCore, dim: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; dim];
    loop {
        fill_normals(rng, &mut v);
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

fn ensure_psd(s: &SymMatrix, what: &str) -> Result<Spectrum> {
    let sp = sym_eigen(s)?;
    if sp.min_eigenvalue() < -PSD_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "{what} is not PSD (minimum eigenvalue {:e})",
            sp.min_eigenvalue()
        )));
    }
    Ok(sp)
}

/// One atom `(A_j, p_j)` of a finite-support distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub matrix: SymMatrix,
    pub probability: f64,
}

#[derive(Debug, Clone)]
enum Kind {
    FiniteSupport {
        atoms: Vec<Atom>,
        cumulative: Vec<f64>,
    },
    RankOneSphere {
        sqrt_sigma: SquareMatrix,
    },
    DiagonalPerturbation {
        epsilon: f64,
    },
}

/// Distribution of the i.i.d. factors `X_i`.
#[derive(Debug, Clone)]
pub struct MatrixDistribution {
    kind: Kind,
    mean: SymMatrix,
    spectrum: Spectrum,
    deviation_bound: f64,
}

/// Almost-sure bound `L` on `‖X − Σ‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationBound(pub f64);

/// A draw `X`, plus `z` when `X = z zᵀ`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub matrix: SymMatrix,
    pub factor: Option<Vec<f64>>,
}

impl MatrixDistribution {
    /// Explicit atoms `{(A_j, p_j)}` with mean `Σ p_j A_j`.
    pub fn finite_support(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidDistribution("finite support needs at least one atom".into()))?;
        let d = first.matrix.dim();
        let mut total = 0.0;
        let mut mean = SquareMatrix::zeros(d);
        for (j, atom) in atoms.iter().enumerate() {
            if atom.matrix.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: atom.matrix.dim(),
                });
            }
            if !(atom.probability > 0.0) || !atom.probability.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "atom {j} has non-positive probability {}",
                    atom.probability
                )));
            }
            ensure_psd(&atom.matrix, &format!("atom {j}"))?;
            total += atom.probability;
            mean = mean.add(&atom.matrix.as_square().scale(atom.probability));
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mean = mean.symmetric_part();
        let spectrum = ensure_psd(&mean, "mean")?;
        let deviation_bound = atoms
            .iter()
            .map(|a| sym_operator_norm(&a.matrix.sub(&mean)))
            .fold(0.0, f64::max);
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.probability;
                acc
            })
            .collect();
        Ok(Self {
            kind: Kind::FiniteSupport { atoms, cumulative },
            mean,
            spectrum,
            deviation_bound,
        })
    }

    /// `X = z zᵀ` with `z = √d Σ^{1/2} u` and `u` uniform on the sphere.
    pub fn rank_one_sphere(sigma: SymMatrix) -> Result<Self> {
        let spectrum = ensure_psd(&sigma, "sigma")?;
        let d = sigma.dim();
        let roots: Vec<f64> = spectrum
            .eigenvalues
            .iter()
            .map(|&l| libm::sqrt(l.max(0.0)))
            .collect();
        let sqrt_sigma = spectrum.reconstruct_with(&roots);
        let lmax = spectrum.max_eigenvalue().max(0.0);
        Ok(Self {
            kind: Kind::RankOneSphere { sqrt_sigma },
            mean: sigma,
            spectrum,
            deviation_bound: d as f64 * lmax + lmax,
        })
    }

    /// `X = Σ + ε D` with `D` diagonal and independent `±1` entries.
    pub fn diagonal_perturbation(sigma: SymMatrix, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let spectrum = ensure_psd(&sigma, "sigma")?;
        if spectrum.min_eigenvalue() < epsilon - PSD_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "diagonal perturbation needs lambda_min(sigma) >= epsilon, got {} < {epsilon}",
                spectrum.min_eigenvalue()
            )));
        }
        Ok(Self {
            kind: Kind::DiagonalPerturbation { epsilon },
            mean: sigma,
            spectrum,
            deviation_bound: epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// The mean `Σ`.
    pub fn mean(&self) -> &SymMatrix {
        &self.mean
    }

    pub fn mean_spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `μ = λ_max(Σ)`.
    pub fn lambda_max(&self) -> f64 {
        self.spectrum.max_eigenvalue().max(0.0)
    }

    pub fn deviation_bound(&self) -> DeviationBound {
        DeviationBound(self.deviation_bound)
    }

    /// Atoms of a finite-support distribution.
    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            Kind::FiniteSupport { atoms, .. } => Some(atoms),
            _ => None,
        }
    }

    pub fn is_rank_one(&self) -> bool {
        matches!(self.kind, Kind::RankOneSphere { .. })
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> SymMatrix {
        self.sample_full(rng).matrix
    }

    pub fn sample_full(&self, rng: &mut impl RngCore) -> Sample {
        match &self.kind {
            Kind::FiniteSupport { atoms, cumulative } => {
                let u = unit_f64(rng);
                let j = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(atoms.len() - 1);
                Sample {
                    matrix: atoms[j].matrix.clone(),
                    factor: None,
                }
            }
            Kind::RankOneSphere { sqrt_sigma } => {
                let d = self.dim();
                let u = unit_sphere(rng, d);
                let scale = libm::sqrt(d as f64);
                let z: Vec<f64> = sqrt_sigma.mul_vec(&u).into_iter().map(|x| x * scale).collect();
                Sample {
                    matrix: SymMatrix::outer(&z),
                    factor: Some(z),
                }
            }
            Kind::DiagonalPerturbation { epsilon } => {
                let d = self.dim();
                let mut shift = alloc::vec![0.0; d];
                let mut bits = 0u64;
                for (i, s) in shift.iter_mut().enumerate() {
                    if i % 64 == 0 {
                        bits = rng.next_u64();
                    }
                    *s = if (bits >> (i % 64)) & 1 == 1 { *epsilon } else { -*epsilon };
                }
                Sample {
                    matrix: self.mean.add(&SymMatrix::from_diagonal(&shift)),
                    factor: None,
                }
            }
        }
    }
}

/// Deviations up to `ROUNDOFF_FLOOR · ‖E_n‖` are rounding noise between the
/// direct product and the spectral mean, and count as zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Crossing rule `dev ≥ threshold`, except that a deviation within rounding
/// of zero never crosses. The exception only matters for zero thresholds
/// (an all-zero schedule or a degenerate source with `L = 0`).
pub fn crosses(dev: f64, threshold: f64, expected_norm: f64) -> bool {
    dev > ROUNDOFF_FLOOR * expected_norm && dev >= threshold
}

/// Values recorded at one step of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub eta: f64,
    /// `‖Z_n − E_n‖`.
    pub dev: f64,
    /// `‖Y_n‖` with `Y_n = E_n⁻¹ Z_n − I`.
    pub ydev: f64,
    /// `‖E_n‖`.
    pub expected_norm: f64,
    /// Realized `η_n ‖X_n − Σ‖`; diagnostic only.
    pub sigma_obs: f64,
    pub boundary: f64,
    /// See [`crosses`].
    pub crossed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub final_product: SquareMatrix,
}

impl TrajectoryRecord {
    pub fn first_crossing(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.crossed).map(|s| s.n)
    }
}

/// Step-by-step simulator for one trajectory.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    dist: &'a MatrixDistribution,
    schedule: &'a StepSchedule,
    rng: StreamRng,
    z: SquareMatrix,
    expected: ExpectedProduct,
    n: usize,
    record_sigma_obs: bool,
    last_sample: Option<Sample>,
}

impl<'a> Simulator<'a> {
    pub fn new(dist: &'a MatrixDistribution, schedule: &'a StepSchedule, seed: u64) -> Self {
        Self {
            dist,
            schedule,
            rng: stream_rng(seed),
            z: SquareMatrix::identity(dist.dim()),
            expected: ExpectedProduct::new(dist.mean_spectrum().clone()),
            n: 0,
            record_sigma_obs: true,
            last_sample: None,
        }
    }

    /// Skip the diagnostic `σ_obs` norm, which costs one eigensolve per step.
    pub fn without_sigma_obs(mut self) -> Self {
        self.record_sigma_obs = false;
        self
    }

    pub fn product(&self) -> &SquareMatrix {
        &self.z
    }

    pub fn last_sample(&self) -> Option<&Sample> {
        self.last_sample.as_ref()
    }

    /// Draws `X_{n+1}` and advances; `boundary` is compared against the new
    /// deviation.
    pub fn step(&mut self, boundary: f64) -> Result<StepRecord> {
        let n = self.n + 1;
        let eta = self.schedule.eta(n)?;
        let sample = self.dist.sample_full(&mut self.rng);
        self.z = left_accumulate(&self.z, &sample.matrix, eta)?;
        self.expected.push(eta);

        let e = self.expected.matrix();
        let dev = operator_norm(&self.z.sub(&e));
        let mut y = self.expected.inverse().matmul(&self.z);
        for i in 0..y.dim() {
            y[(i, i)] -= 1.0;
        }
        let ydev = operator_norm(&y);
        let sigma_obs = if self.record_sigma_obs {
            eta * sym_operator_norm(&sample.matrix.sub(self.dist.mean()))
        } else {
            f64::NAN
        };
        self.n = n;
        self.last_sample = Some(sample);
        let expected_norm = self.expected.norm();
        Ok(StepRecord {
            n,
            eta,
            dev,
            ydev,
            expected_norm,
            sigma_obs,
            boundary,
            crossed: crosses(dev, boundary, expected_norm),
        })
    }
}

/// Simulates `n_max` steps; `boundary(n)` is the crossing threshold at step `n`.
pub fn simulate_trajectory(
    dist: &MatrixDistribution,
    schedule: &StepSchedule,
    n_max: usize,
    boundary: impl Fn(usize) -> f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    if let Some(horizon) = schedule.horizon() {
        if n_max > horizon {
            return Err(Error::Horizon { step: n_max, horizon });
        }
    }
    let mut sim = Simulator::new(dist, schedule, seed);
    let mut steps = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        steps.push(sim.step(boundary(n))?);
    }
    Ok(TrajectoryRecord {
        seed,
        steps,
        final_product: sim.z,
    })
}
