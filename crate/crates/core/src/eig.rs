//! Cholesky factorization, a cyclic Jacobi eigensolver, and the smallest
//! eigenvalue of a symmetric-definite pencil.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymMatrix};

pub const MAX_SWEEPS: usize = 200;

/// Condition estimates above this mark a result as ill-conditioned.
pub const ILL_CONDITIONED_THRESHOLD: f64 = 1e14;

/// Largest relative residual for a result to count as reliable.
pub const RELIABLE_RESIDUAL: f64 = 1e-8;

/// Lower-triangular `L` with `L·Lᵀ = b`.
///
/// A pivot that is not strictly positive (or not finite) fails with its
/// 1-based index.
pub fn cholesky(b: &SymMatrix) -> Result<Matrix> {
    let n = b.size();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = b.get(j, j);
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag.is_finite() && diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = b.get(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Eigenvalues in ascending order with matching unit eigenvectors stored as
/// the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, index: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, index)]).collect()
    }
}

/// Ascending eigenvalues.
pub fn sym_eigen(a: &SymMatrix) -> Result<Vec<f64>> {
    Ok(sym_eigen_decomposition(a)?.values)
}

/// Cyclic Jacobi; sweeps until the off-diagonal Frobenius norm drops to
/// `1e-14·‖A‖_F`.
pub fn sym_eigen_decomposition(a: &SymMatrix) -> Result<EigenDecomposition> {
    let n = a.size();
    let mut m = a.to_matrix();
    let mut v = Matrix::identity(n);
    let tol = 1e-14 * a.frobenius_norm();
    if !tol.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }

    let mut converged = false;
    for _ in 0..=MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                m[(p, p)] -= t * apq;
                m[(q, q)] += t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let g = m[(r, p)];
                        let h = m[(r, q)];
                        let rp = g - s * (h + g * tau);
                        let rq = h + s * (g - h * tau);
                        m[(r, p)] = rp;
                        m[(p, r)] = rp;
                        m[(r, q)] = rq;
                        m[(q, r)] = rq;
                    }
                    let g = v[(r, p)];
                    let h = v[(r, q)];
                    v[(r, p)] = g - s * (h + g * tau);
                    v[(r, q)] = h + s * (g - h * tau);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Which matrix of the pencil was Cholesky-factored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ReductionSide {
    /// `A = L·Lᵀ`; `τ = 1/λ_max(L⁻¹·B·L⁻ᵀ)`.
    A,
    /// `B = L·Lᵀ`; `τ = λ_min(L⁻¹·A·L⁻ᵀ)`.
    B,
}

#[derive(Clone, Debug)]
pub struct GenEigResult {
    /// Smallest generalized eigenvalue: the largest `τ` with `A − τB ⪰ 0`.
    pub tau: f64,
    /// `‖A·v − τ·B·v‖₂ / ‖A‖_F` for the unit eigenvector `v`.
    pub residual: f64,
    pub condition_estimate: f64,
    pub reduction_side: ReductionSide,
    pub ill_conditioned: bool,
    pub reliable: bool,
    pub eigenvector: Vec<f64>,
}

fn spectral_condition(m: &SymMatrix) -> Result<f64> {
    let ev = sym_eigen(m)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Smallest eigenvalue of the pencil `(A, B)` with `B` positive definite.
///
/// `A` is factored when its Cholesky succeeds and `B` otherwise. Working
/// from the `A` side turns the wanted eigenvalue into the dominant one of the
/// reduced matrix, which Jacobi resolves to full relative accuracy even
/// when `A` is close to singular.
pub fn gen_eig_min(a: &SymMatrix, b: &SymMatrix) -> Result<GenEigResult> {
    if a.basis() != b.basis() {
        return Err(Error::BasisMismatch);
    }
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch { expected: a.size(), found: b.size() });
    }
    if a.size() == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    let (tau, raw_vector, side, factored_condition) = match cholesky(a) {
        Ok(la) => {
            let inv = la.lower_triangular_inverse()?;
            let reduced = inv.congruence(b)?;
            let eig = sym_eigen_decomposition(&reduced)?;
            let last = eig.values.len() - 1;
            let mu = eig.values[last];
            // The reduced matrix is congruent to B, so its spectrum settles
            // definiteness without a second factorization. Only a clearly
            // negative eigenvalue counts; rounding noise does not.
            if mu.is_nan() || mu <= 0.0 || eig.values[0] < -1e-12 * mu {
                cholesky(b)?;
                return Err(Error::NotPositiveDefinite { pivot: b.size() });
            }
            let w = eig.vector(last);
            (1.0 / mu, inv.transpose().mul_vec(&w), ReductionSide::A, spectral_condition(a)?)
        }
        Err(_) => {
            let lb = cholesky(b)?;
            let inv = lb.lower_triangular_inverse()?;
            let reduced = inv.congruence(a)?;
            let eig = sym_eigen_decomposition(&reduced)?;
            let w = eig.vector(0);
            (eig.values[0], inv.transpose().mul_vec(&w), ReductionSide::B, spectral_condition(b)?)
        }
    };

    let norm = raw_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v: Vec<f64> = raw_vector.iter().map(|x| x / norm).collect();
    let av = a.mul_vec(&v);
    let bv = b.mul_vec(&v);
    let a_norm = a.frobenius_norm();
    let r = av.iter().zip(&bv).map(|(x, y)| (x - tau * y).powi(2)).sum::<f64>().sqrt();
    let residual = if a_norm > 0.0 { r / a_norm } else { r };

    let vbv: f64 = v.iter().zip(&bv).map(|(x, y)| x * y).sum();
    let eigen_condition = if tau != 0.0 && vbv > 0.0 {
        (a_norm + tau.abs() * b.frobenius_norm()) / (tau.abs() * vbv)
    } else {
        f64::INFINITY
    };
    let condition_estimate = factored_condition.max(eigen_condition);
    let ill_conditioned = condition_estimate.is_nan() || condition_estimate > ILL_CONDITIONED_THRESHOLD;
    let reliable = !ill_conditioned && residual <= RELIABLE_RESIDUAL && tau.is_finite();

    Ok(GenEigResult {
        tau,
        residual,
        condition_estimate,
        reduction_side: side,
        ill_conditioned,
        reliable,
        eigenvector: v,
    })
}
