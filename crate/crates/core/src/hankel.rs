//! Hankel moment matrices, the model matrix of the normalized sub-level
//! measure, localizing matrices for `x(1−x)`, and the basis changes applied
//! before the generalized eigenvalue solve.
//!
//! Everything is assembled from exact rationals; a congruence into another
//! basis is also carried out exactly and the result is rounded once.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::eig::cholesky;
use crate::error::{Error, Result};
use crate::matrix::{BasisKind, ExactMatrix, ExactSymMatrix, Matrix, SymMatrix};
use crate::moments::{model_moment, MomentSequence};

fn require_order(values: &[BigRational], required: usize) -> Result<()> {
    if values.len() <= required {
        return Err(Error::InsufficientMoments { required, available: values.len().saturating_sub(1) });
    }
    Ok(())
}

/// `M_d(φ)` with entry `(k, ℓ) = φ_{k+ℓ}` (zero-based), size `d+1`.
pub fn moment_matrix_exact(values: &[BigRational], d: usize) -> Result<ExactSymMatrix> {
    require_order(values, 2 * d)?;
    Ok(ExactSymMatrix::from_fn(d + 1, BasisKind::Monomial, |i, j| values[i + j].clone()))
}

pub fn moment_matrix(seq: &MomentSequence, d: usize) -> Result<SymMatrix> {
    Ok(moment_matrix_exact(&seq.values, d)?.to_f64())
}

/// Model matrix with entry `(k, ℓ) = n/(n + (k+ℓ)t)` (zero-based).
pub fn model_matrix_exact(n: u32, t: u32, d: usize) -> ExactSymMatrix {
    let moments: Vec<BigRational> = (0..=2 * d as u32).map(|j| model_moment(n, t, j)).collect();
    ExactSymMatrix::from_fn(d + 1, BasisKind::Monomial, |i, j| moments[i + j].clone())
}

pub fn model_matrix(n: u32, t: u32, d: usize) -> SymMatrix {
    model_matrix_exact(n, t, d).to_f64()
}

/// Localizing matrix of `x(1−x)`: entry `(k, ℓ) = φ_{k+ℓ+1} − φ_{k+ℓ+2}`
/// (zero-based), size `d+1`, needing moments through order `2d+2`.
pub fn localizing_matrix_unit_interval_exact(values: &[BigRational], d: usize) -> Result<ExactSymMatrix> {
    require_order(values, 2 * d + 2)?;
    Ok(ExactSymMatrix::from_fn(d + 1, BasisKind::Monomial, |i, j| &values[i + j + 1] - &values[i + j + 2]))
}

pub fn localizing_matrix_unit_interval(values: &[BigRational], d: usize) -> Result<SymMatrix> {
    Ok(localizing_matrix_unit_interval_exact(values, d)?.to_f64())
}

/// Rows hold the monomial coefficients of `T_k(a·x + b)`, `k = 0..=d`, where
/// `x ↦ a·x + b` maps `[lo, hi]` onto `[−1, 1]`.
pub fn chebyshev_congruence(d: usize, lo: &BigRational, hi: &BigRational) -> Result<ExactMatrix> {
    if lo >= hi {
        return Err(Error::InvalidArgument(format!("degenerate interval [{lo}, {hi}]")));
    }
    let width = hi - lo;
    let a = BigRational::from_integer(2.into()) / &width;
    let b = -(hi + lo) / &width;
    let two = BigRational::from_integer(2.into());

    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(d + 1);
    rows.push(vec![BigRational::one()]);
    if d >= 1 {
        rows.push(vec![b.clone(), a.clone()]);
    }
    for k in 2..=d {
        // T_k = 2(a x + b) T_{k-1} − T_{k-2}
        let prev = &rows[k - 1];
        let mut next = vec![BigRational::zero(); k + 1];
        for (m, c) in prev.iter().enumerate() {
            next[m] += &two * &b * c;
            next[m + 1] += &two * &a * c;
        }
        for (m, c) in rows[k - 2].iter().enumerate() {
            next[m] -= c;
        }
        rows.push(next);
    }
    Ok(ExactMatrix::from_fn(d + 1, d + 1, |i, j| rows[i].get(j).cloned().unwrap_or_else(BigRational::zero)))
}

/// `C = L⁻¹` where `base = L·Lᵀ`, so that `C·base·Cᵀ = I`.
pub fn orthonormal_congruence(base: &SymMatrix) -> Result<Matrix> {
    cholesky(base)?.lower_triangular_inverse()
}

/// The matrix pair `(M_d(#λ), M*_d)` expressed in a common basis.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub pushforward: SymMatrix,
    pub model: SymMatrix,
}

/// Assembles the degree-`d` pencil from exact pushforward moments.
///
/// Every basis change is applied to the exact matrices and rounded once.
/// The orthonormal bases use an exact `LDLᵀ` of the reference matrix, which
/// then becomes the identity exactly.
pub fn assemble_pencil(moments: &[BigRational], n: u32, t: u32, d: usize, basis: &BasisKind) -> Result<Pencil> {
    let a = moment_matrix_exact(moments, d)?;
    let b = model_matrix_exact(n, t, d);
    let (pushforward, model) = match basis {
        BasisKind::Monomial => (a.to_f64(), b.to_f64()),
        BasisKind::Chebyshev { lo, hi } => {
            let c = chebyshev_congruence(d, lo, hi)?;
            (
                c.congruence(&a)?.with_basis(basis.clone()).to_f64(),
                c.congruence(&b)?.with_basis(basis.clone()).to_f64(),
            )
        }
        BasisKind::OrthonormalModel => {
            let f = b.ldl()?;
            (f.normalized_congruence(&a, basis.clone())?, f.normalized_congruence(&b, basis.clone())?)
        }
        BasisKind::OrthonormalPushforward => {
            let f = a.ldl()?;
            (f.normalized_congruence(&a, basis.clone())?, f.normalized_congruence(&b, basis.clone())?)
        }
    };
    Ok(Pencil { pushforward, model })
}

/// True when every leading principal minor is positive (exact).
pub fn is_positive_definite_exact(m: &ExactSymMatrix) -> bool {
    m.ldl().is_ok()
}

/// Exact positive semidefiniteness by symmetric Gaussian elimination with
/// zero-pivot handling.
pub fn is_positive_semidefinite_exact(m: &ExactSymMatrix) -> bool {
    let n = m.size();
    let mut a: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j).clone()).collect()).collect();
    let mut active: Vec<usize> = (0..n).collect();
    while let Some(&p) = active.first() {
        if a[p][p].is_negative() {
            return false;
        }
        if a[p][p].is_zero() {
            if active.iter().any(|&j| !a[p][j].is_zero()) {
                return false;
            }
            active.remove(0);
            continue;
        }
        let rest: Vec<usize> = active[1..].to_vec();
        for &i in &rest {
            if a[i][p].is_zero() {
                continue;
            }
            let f = &a[i][p] / &a[p][p];
            for &j in &rest {
                let delta = &f * &a[p][j];
                a[i][j] -= delta;
            }
        }
        active = rest;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::gen_eig_min;
    use crate::moments::{pushforward_moments, BoxSpec};
    use crate::poly::parse_polynomial;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn exact_rows(m: &ExactSymMatrix) -> Vec<Vec<BigRational>> {
        (0..m.size()).map(|i| (0..m.size()).map(|j| m.get(i, j).clone()).collect()).collect()
    }

    fn disk_moments(order: usize) -> Vec<BigRational> {
        let g = parse_polynomial("x1^2 + x2^2", 2).unwrap();
        pushforward_moments(&g, &BoxSpec::unit(2), order).unwrap().values
    }

    #[test]
    fn disk_moment_matrices() {
        let v = disk_moments(4);
        assert_eq!(exact_rows(&moment_matrix_exact(&v, 1).unwrap()), vec![vec![q(1, 1), q(2, 3)], vec![q(2, 3), q(28, 45)]]);
        let m2 = moment_matrix_exact(&v, 2).unwrap();
        assert_eq!(m2.get(2, 2), &(q(2, 9) + q(8, 21) + q(6, 25)));
        assert_eq!(m2.get(1, 2), &q(24, 35));
        assert_eq!(
            moment_matrix_exact(&v, 3).unwrap_err(),
            Error::InsufficientMoments { required: 6, available: 4 }
        );
    }

    #[test]
    fn constant_sequence_gives_all_ones() {
        let v = vec![q(1, 1); 5];
        let m = moment_matrix_exact(&v, 2).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| m.get(i, j) == &q(1, 1))));
    }

    #[test]
    fn model_matrix_examples() {
        assert_eq!(exact_rows(&model_matrix_exact(2, 2, 1)), vec![vec![q(1, 1), q(1, 2)], vec![q(1, 2), q(1, 3)]]);
        let m2 = model_matrix_exact(2, 2, 2);
        assert_eq!(m2.get(2, 2), &q(1, 5));
        assert_eq!(m2.get(0, 2), &q(1, 3));
        assert_eq!(exact_rows(&model_matrix_exact(7, 4, 0)), vec![vec![q(1, 1)]]);
    }

    #[test]
    fn localizing_examples() {
        let model: Vec<BigRational> = (0..4).map(|j| model_moment(2, 2, j)).collect();
        assert_eq!(exact_rows(&localizing_matrix_unit_interval_exact(&model, 0).unwrap()), vec![vec![q(1, 6)]]);

        let dirac0: Vec<BigRational> = (0..6).map(|j| if j == 0 { q(1, 1) } else { q(0, 1) }).collect();
        let z = localizing_matrix_unit_interval_exact(&dirac0, 1).unwrap();
        assert!((0..2).all(|i| (0..2).all(|j| z.get(i, j).is_zero())));

        let half: Vec<BigRational> = (0..5).map(|j| q(1, 1 << j)).collect();
        assert_eq!(
            exact_rows(&localizing_matrix_unit_interval_exact(&half, 1).unwrap()),
            vec![vec![q(1, 4), q(1, 8)], vec![q(1, 8), q(1, 16)]]
        );
        assert!(localizing_matrix_unit_interval_exact(&half, 2).is_err());
    }

    #[test]
    fn chebyshev_rows() {
        let (lo, hi) = (q(-1, 1), q(1, 1));
        assert_eq!(chebyshev_congruence(0, &lo, &hi).unwrap(), ExactMatrix::identity(1));
        assert_eq!(chebyshev_congruence(1, &lo, &hi).unwrap(), ExactMatrix::identity(2));
        let c = chebyshev_congruence(2, &lo, &hi).unwrap();
        assert_eq!([c.get(2, 0), c.get(2, 1), c.get(2, 2)], [&q(-1, 1), &q(0, 1), &q(2, 1)]);
        // On [0, 1]: T_1(2x − 1) = 2x − 1.
        let c = chebyshev_congruence(1, &q(0, 1), &q(1, 1)).unwrap();
        assert_eq!([c.get(1, 0), c.get(1, 1)], [&q(-1, 1), &q(2, 1)]);
        assert!(chebyshev_congruence(2, &hi, &lo).is_err());
    }

    #[test]
    fn orthonormal_examples() {
        let id = SymMatrix::identity(3, BasisKind::Monomial);
        assert_eq!(orthonormal_congruence(&id).unwrap(), Matrix::identity(3));

        let d = SymMatrix::diagonal(&[4.0, 9.0], BasisKind::Monomial);
        let c = orthonormal_congruence(&d).unwrap();
        assert!(c.max_abs_diff(&Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 1.0 / 3.0]]).unwrap()) < 1e-16);

        let m = model_matrix(2, 2, 1);
        let c = orthonormal_congruence(&m).unwrap();
        let w = c.congruence(&m).unwrap();
        assert!(w.to_matrix().max_abs_diff(&Matrix::identity(2)) < 1e-12);

        let bad = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], BasisKind::Monomial).unwrap();
        assert_eq!(orthonormal_congruence(&bad).unwrap_err(), Error::NotPositiveDefinite { pivot: 2 });
    }

    #[test]
    fn pencil_is_basis_invariant_on_the_disk() {
        let v = disk_moments(12);
        for d in 1..=6 {
            let reference = {
                let p = assemble_pencil(&v, 2, 2, d, &BasisKind::OrthonormalPushforward).unwrap();
                gen_eig_min(&p.pushforward, &p.model).unwrap().tau
            };
            for basis in [BasisKind::Monomial, BasisKind::chebyshev(), BasisKind::OrthonormalModel] {
                let p = assemble_pencil(&v, 2, 2, d, &basis).unwrap();
                assert_eq!(p.pushforward.basis(), &basis);
                let tau = gen_eig_min(&p.pushforward, &p.model).unwrap().tau;
                assert!(((tau - reference) / reference).abs() < 1e-8, "d={d} {basis}: {tau} vs {reference}");
            }
        }
    }

    #[test]
    fn orthonormal_reference_side_is_identity() {
        let v = disk_moments(8);
        let p = assemble_pencil(&v, 2, 2, 4, &BasisKind::OrthonormalPushforward).unwrap();
        assert_eq!(p.pushforward, SymMatrix::identity(5, BasisKind::OrthonormalPushforward));
        let p = assemble_pencil(&v, 2, 2, 4, &BasisKind::OrthonormalModel).unwrap();
        assert_eq!(p.model, SymMatrix::identity(5, BasisKind::OrthonormalModel));
    }

    #[test]
    fn exact_semidefinite_checks() {
        let dirac0: Vec<BigRational> = (0..6).map(|j| if j == 0 { q(1, 1) } else { q(0, 1) }).collect();
        let m = moment_matrix_exact(&dirac0, 2).unwrap();
        assert!(is_positive_semidefinite_exact(&m));
        assert!(!is_positive_definite_exact(&m));
        let v = disk_moments(10);
        assert!(is_positive_definite_exact(&moment_matrix_exact(&v, 5).unwrap()));
        let indefinite = ExactSymMatrix::from_fn(2, BasisKind::Monomial, |i, j| if i == j { q(0, 1) } else { q(1, 1) });
        assert!(!is_positive_semidefinite_exact(&indefinite));
    }
}
