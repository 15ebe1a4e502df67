//! Dense real matrices for small dimensions.
//!
//! Everything is stored row-major in a single `Vec<f64>`. The only
//! decomposition is a cyclic Jacobi eigensolver for symmetric input; the
//! operator norm of a general square matrix goes through the same kernel
//! applied to `AᵀA`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius tolerance for Jacobi sweeps.
pub const JACOBI_TOLERANCE: f64 = 1e-13;
/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// A dense `d × d` real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        self.matmul_into(rhs, &mut out);
        out
    }

    /// `out ← self · rhs`.
    pub fn matmul_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.dim;
        assert_eq!(n, rhs.dim);
        assert_eq!(n, out.dim);
        out.data.fill(0.0);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * n..(i + 1) * n];
                let src = &rhs.data[k * n..(k + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(n, v.len());
        (0..n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &a| m.max(a.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|a| a * a).sum())
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> SymMatrix {
        SymMatrix::from_square(self)
    }

    /// `AᵀA`, symmetric by construction.
    pub fn gram(&self) -> SymMatrix {
        let n = self.dim;
        let mut g = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.data[k * n + i] * self.data[k * n + j];
                }
                g.data[i * n + j] = s;
                g.data[j * n + i] = s;
            }
        }
        SymMatrix(g)
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// A dense symmetric matrix. Symmetry is exact: every constructor
/// symmetrizes its input as `(A + Aᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(SquareMatrix);

impl SymMatrix {
    pub fn from_square(a: &SquareMatrix) -> Self {
        let n = a.dim;
        let mut s = a.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (a.data[i * n + j] + a.data[j * n + i]);
                s.data[i * n + j] = v;
                s.data[j * n + i] = v;
            }
        }
        Self(s)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        SquareMatrix::from_rows(rows).map(|m| Self::from_square(&m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(SquareMatrix::from_diagonal(diag))
    }

    pub fn identity(dim: usize) -> Self {
        Self(SquareMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(SquareMatrix::zeros(dim))
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j];
            }
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_square(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_square(self) -> SquareMatrix {
        self.0
    }

    pub fn sub(&self, rhs: &SymMatrix) -> SymMatrix {
        Self(self.0.sub(&rhs.0))
    }

    pub fn add(&self, rhs: &SymMatrix) -> SymMatrix {
        Self(self.0.add(&rhs.0))
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        Self(self.0.scale(s))
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigendecomposition `S = Q Λ Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: SquareMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Column `j` of the eigenvector matrix.
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors[(i, j)]).collect()
    }

    /// `Q diag(f(λ)) Qᵀ` with `f` applied per eigenvalue index.
    pub fn reconstruct_with(&self, weights: &[f64]) -> SquareMatrix {
        let n = self.dim();
        assert_eq!(weights.len(), n);
        let q = &self.eigenvectors;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    s += q.data[i * n + k] * w * q.data[j * n + k];
                }
                out.data[i * n + j] = s;
                out.data[j * n + i] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SquareMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }
}

/// Cyclic Jacobi sweep on a row-major symmetric buffer. Returns
/// `(sweeps, final off-diagonal Frobenius norm, converged)`.
fn jacobi_in_place(a: &mut [f64], n: usize, mut v: Option<&mut [f64]>) -> (usize, f64, bool) {
    let total = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let target = JACOBI_TOLERANCE * total;
    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        libm::sqrt(s)
    };

    let mut off = off_norm(a);
    let mut sweeps = 0;
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return (sweeps, off, false);
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_finite() {
                    let t = 1.0 / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                } else {
                    // |theta| overflowed: rotation angle is negligible.
                    0.5 / theta
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                if let Some(v) = v.as_deref_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        off = off_norm(a);
    }
    (sweeps, off, true)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen(s: &SymMatrix) -> Result<Spectrum> {
    let n = s.dim();
    let mut a = s.0.data.clone();
    let mut v = SquareMatrix::identity(n).data;
    let (sweeps, residual, converged) = jacobi_in_place(&mut a, n, Some(&mut v));
    if !converged {
        return Err(Error::NoConvergence { sweeps, residual });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = SquareMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors.data[r * n + col] = v[r * n + src];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, unsorted. Falls back to the current diagonal if the
/// sweep cap is hit; Jacobi converges quadratically so this is not expected.
fn sym_eigenvalues(s: &SymMatrix) -> Vec<f64> {
    let n = s.dim();
    let mut a = s.0.data.clone();
    jacobi_in_place(&mut a, n, None);
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Spectral norm `max_j |λ_j|` of a symmetric matrix.
pub fn sym_operator_norm(s: &SymMatrix) -> f64 {
    sym_eigenvalues(s).into_iter().fold(0.0, |m, l| m.max(l.abs()))
}

/// Largest singular value, computed as `sqrt(λ_max(AᵀA))`.
pub fn operator_norm(a: &SquareMatrix) -> f64 {
    let lmax = sym_eigenvalues(&a.gram())
        .into_iter()
        .fold(0.0f64, f64::max);
    libm::sqrt(lmax.max(0.0))
}

/// Running spectral form of `E_n = ∏ (I + η_i Σ)`.
///
/// All factors are polynomials in `Σ`, so they share `Σ`'s eigenvectors and
/// the product reduces to per-eigenvalue scalars `∏_i (1 + η_i λ_j)`.
#[derive(Debug, Clone)]
pub struct ExpectedProduct {
    spectrum: Spectrum,
    factors: Vec<f64>,
}

impl ExpectedProduct {
    pub fn new(spectrum: Spectrum) -> Self {
        let factors = vec![1.0; spectrum.dim()];
        Self { spectrum, factors }
    }

    /// Multiplies in one more factor `(I + η Σ)`.
    pub fn push(&mut self, eta: f64) {
        for (f, l) in self.factors.iter_mut().zip(&self.spectrum.eigenvalues) {
            *f *= 1.0 + eta * l;
        }
    }

    /// Per-eigenvalue products, in the spectrum's order.
    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn matrix(&self) -> SquareMatrix {
        self.spectrum.reconstruct_with(&self.factors)
    }

    pub fn inverse(&self) -> SquareMatrix {
        let inv: Vec<f64> = self.factors.iter().map(|f| 1.0 / f).collect();
        self.spectrum.reconstruct_with(&inv)
    }

    /// `‖E_n‖`, the largest factor in absolute value.
    pub fn norm(&self) -> f64 {
        self.factors.iter().fold(0.0, |m, f| m.max(f.abs()))
    }
}

/// `E_n = U diag(∏_i (1 + η_i λ_j)) Uᵀ`.
pub fn expected_product(spectrum: &Spectrum, etas: &[f64]) -> SquareMatrix {
    let mut e = ExpectedProduct::new(spectrum.clone());
    for &eta in etas {
        e.push(eta);
    }
    e.matrix()
}

/// `E_n⁻¹ = U diag(∏_i (1 + η_i λ_j)⁻¹) Uᵀ`.
pub fn inverse_expected_product(spectrum: &Spectrum, etas: &[f64]) -> SquareMatrix {
    let mut e = ExpectedProduct::new(spectrum.clone());
    for &eta in etas {
        e.push(eta);
    }
    e.inverse()
}

/// `(I + η X) · Z_prev`: the newest factor multiplies on the left.
pub fn left_accumulate(z_prev: &SquareMatrix, x: &SymMatrix, eta: f64) -> Result<SquareMatrix> {
    if z_prev.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: z_prev.dim(),
            found: x.dim(),
        });
    }
    let mut out = x.as_square().matmul(z_prev);
    for (o, z) in out.data.iter_mut().zip(&z_prev.data) {
        *o = z + eta * *o;
    }
    Ok(out)
}
