//! Dense matrices: double-precision symmetric matrices tagged with the
//! polynomial basis they are expressed in, and exact rational matrices used
//! to build them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Polynomial basis indexing the rows and columns of a Hankel-type matrix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum BasisKind {
    Monomial,
    /// Shifted Chebyshev polynomials `T_k` on `[lo, hi]`.
    Chebyshev { lo: BigRational, hi: BigRational },
    /// Orthonormal with respect to the model moments.
    OrthonormalModel,
    /// Orthonormal with respect to the pushforward moments.
    #[default]
    OrthonormalPushforward,
}

impl BasisKind {
    /// Chebyshev basis on the default interval `[0, 1]`.
    pub fn chebyshev() -> Self {
        BasisKind::Chebyshev { lo: BigRational::zero(), hi: BigRational::one() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Monomial => "monomial",
            BasisKind::Chebyshev { .. } => "chebyshev",
            BasisKind::OrthonormalModel => "orthonormal-model",
            BasisKind::OrthonormalPushforward => "orthonormal-push",
        }
    }
}


impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monomial" => Ok(BasisKind::Monomial),
            "chebyshev" => Ok(BasisKind::chebyshev()),
            "orthonormal-model" => Ok(BasisKind::OrthonormalModel),
            "orthonormal-push" | "orthonormal-pushforward" => Ok(BasisKind::OrthonormalPushforward),
            other => Err(Error::InvalidArgument(format!("unknown basis '{other}'"))),
        }
    }
}

/// Correctly rounded conversion; saturates to ±∞ / 0 outside the f64 range.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Row-major dense matrix of doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length must equal column count");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `C·S·Cᵀ` for a symmetric `S`, symmetrized.
    pub fn congruence(&self, s: &SymMatrix) -> Result<SymMatrix> {
        if self.cols != s.size() {
            return Err(Error::DimensionMismatch { expected: self.cols, found: s.size() });
        }
        let cs = self.matmul(&s.to_matrix())?;
        let full = cs.matmul(&self.transpose())?;
        Ok(SymMatrix::from_fn(self.rows, s.basis().clone(), |i, j| 0.5 * (full[(i, j)] + full[(j, i)])))
    }

    /// Inverse of a lower-triangular matrix by forward substitution.
    pub fn lower_triangular_inverse(&self) -> Result<Matrix> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.cols });
        }
        let mut inv = Matrix::zeros(n, n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in col..i {
                    s -= self[(i, k)] * inv[(k, col)];
                }
                let piv = self[(i, i)];
                if piv == 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: i + 1 });
                }
                inv[(i, col)] = s / piv;
            }
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense symmetric matrix of doubles in a declared basis.
///
/// Storage is the full square; `set` writes both triangles so the two
/// halves are always bitwise equal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    size: usize,
    data: Vec<f64>,
    basis: BasisKind,
}

impl SymMatrix {
    pub fn zeros(size: usize, basis: BasisKind) -> Self {
        SymMatrix { size, data: vec![0.0; size * size], basis }
    }

    pub fn identity(size: usize, basis: BasisKind) -> Self {
        let mut m = Self::zeros(size, basis);
        for i in 0..size {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from the lower triangle: `f(i, j)` is called for `j ≤ i`.
    pub fn from_fn(size: usize, basis: BasisKind, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(size, basis);
        for i in 0..size {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Rejects input whose two triangles differ.
    pub fn from_rows(rows: &[Vec<f64>], basis: BasisKind) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        for i in 0..m.rows() {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidArgument(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(SymMatrix { size: m.rows(), data: m.data, basis })
    }

    pub fn diagonal(values: &[f64], basis: BasisKind) -> Self {
        let mut m = Self::zeros(values.len(), basis);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn basis(&self) -> &BasisKind {
        &self.basis
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.size + j] = value;
        self.data[j * self.size + i] = value;
    }

    pub fn with_basis(mut self, basis: BasisKind) -> Self {
        self.basis = basis;
        self
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.size, cols: self.size, data: self.data.clone() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size.max(1)).map(<[f64]>::to_vec).take(self.size).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size, "vector length must equal matrix size");
        self.data.chunks(self.size).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `self − s·other`.
    pub fn sub_scaled(&self, s: f64, other: &SymMatrix) -> Result<SymMatrix> {
        if self.size != other.size {
            return Err(Error::DimensionMismatch { expected: self.size, found: other.size });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - s * b).collect();
        Ok(SymMatrix { size: self.size, data, basis: self.basis.clone() })
    }

    /// `vᵀ S v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Dense matrix of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl ExactMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExactMatrix { rows, cols, data: vec![BigRational::zero(); rows * cols] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.data[i * size + i] = BigRational::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> BigRational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ExactMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigRational) {
        self.data[i * self.cols + j] = value;
    }

    pub fn to_f64(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(rational_to_f64).collect() }
    }

    pub fn matmul(&self, other: &ExactMatrix) -> Result<ExactMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = ExactMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `C·S·Cᵀ`, exact.
    pub fn congruence(&self, s: &ExactSymMatrix) -> Result<ExactSymMatrix> {
        if self.cols != s.size {
            return Err(Error::DimensionMismatch { expected: self.cols, found: s.size });
        }
        let cs = self.matmul(&s.to_matrix())?;
        Ok(ExactSymMatrix::from_fn(self.rows, s.basis.clone(), |i, j| {
            (0..self.cols)
                .filter(|&k| !self.get(j, k).is_zero())
                .map(|k| cs.get(i, k) * self.get(j, k))
                .fold(BigRational::zero(), |acc, x| acc + x)
        }))
    }

    /// Inverse of a unit lower-triangular matrix.
    pub fn unit_lower_inverse(&self) -> ExactMatrix {
        let n = self.rows;
        let mut inv = ExactMatrix::identity(n);
        for col in 0..n {
            for i in col + 1..n {
                let mut s = BigRational::zero();
                for k in col..i {
                    let l = self.get(i, k);
                    if !l.is_zero() {
                        s -= l * inv.get(k, col);
                    }
                }
                inv.set(i, col, s);
            }
        }
        inv
    }
}

/// Symmetric matrix of exact rationals in a declared basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSymMatrix {
    size: usize,
    data: Vec<BigRational>,
    basis: BasisKind,
}

/// `S = L·diag(D)·Lᵀ` with `L` unit lower-triangular.
#[derive(Clone, Debug)]
pub struct Ldl {
    pub unit_lower: ExactMatrix,
    pub diagonal: Vec<BigRational>,
}

impl ExactSymMatrix {
    /// Builds from the lower triangle: `f(i, j)` is called for `j ≤ i`.
    pub fn from_fn(size: usize, basis: BasisKind, mut f: impl FnMut(usize, usize) -> BigRational) -> Self {
        let mut data = vec![BigRational::zero(); size * size];
        for i in 0..size {
            for j in 0..=i {
                let v = f(i, j);
                data[j * size + i] = v.clone();
                data[i * size + j] = v;
            }
        }
        ExactSymMatrix { size, data, basis }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn basis(&self) -> &BasisKind {
        &self.basis
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.size + j]
    }

    pub fn with_basis(mut self, basis: BasisKind) -> Self {
        self.basis = basis;
        self
    }

    pub fn to_matrix(&self) -> ExactMatrix {
        ExactMatrix { rows: self.size, cols: self.size, data: self.data.clone() }
    }

    /// Rounds every entry once.
    pub fn to_f64(&self) -> SymMatrix {
        SymMatrix { size: self.size, data: self.data.iter().map(rational_to_f64).collect(), basis: self.basis.clone() }
    }

    /// Exact `LDLᵀ` factorization; fails with the 1-based index of the first
    /// pivot that is not strictly positive.
    pub fn ldl(&self) -> Result<Ldl> {
        let n = self.size;
        let mut l = ExactMatrix::identity(n);
        let mut d: Vec<BigRational> = Vec::with_capacity(n);
        for j in 0..n {
            let mut dj = self.get(j, j).clone();
            for (k, dk) in d.iter().enumerate() {
                let ljk = l.get(j, k);
                if !ljk.is_zero() {
                    dj -= ljk * ljk * dk;
                }
            }
            if !dj.is_positive() {
                return Err(Error::NotPositiveDefinite { pivot: j + 1 });
            }
            for i in j + 1..n {
                let mut s = self.get(i, j).clone();
                for (k, dk) in d.iter().enumerate() {
                    let (lik, ljk) = (l.get(i, k), l.get(j, k));
                    if !lik.is_zero() && !ljk.is_zero() {
                        s -= lik * ljk * dk;
                    }
                }
                l.set(i, j, s / &dj);
            }
            d.push(dj);
        }
        Ok(Ldl { unit_lower: l, diagonal: d })
    }
}

impl Ldl {
    /// Rounds `D^{-1/2}·L⁻¹·S·L⁻ᵀ·D^{-1/2}` to doubles.
    ///
    /// Entry `(i, j)` is `sign(G_ij)·sqrt(G_ij² / (D_i·D_j))` with
    /// `G = L⁻¹·S·L⁻ᵀ` exact, so each entry sees only the final roundings.
    pub fn normalized_congruence(&self, s: &ExactSymMatrix, basis: BasisKind) -> Result<SymMatrix> {
        let g = self.unit_lower.unit_lower_inverse().congruence(s)?;
        let d = &self.diagonal;
        Ok(SymMatrix::from_fn(s.size(), basis, |i, j| {
            let gij = g.get(i, j);
            if gij.is_zero() {
                return 0.0;
            }
            let ratio = gij * gij / (&d[i] * &d[j]);
            let magnitude = rational_to_f64(&ratio).sqrt();
            if gij.is_negative() {
                -magnitude
            } else {
                magnitude
            }
        }))
    }

    /// The float transform `D^{-1/2}·L⁻¹`.
    pub fn transform(&self) -> Matrix {
        let inv = self.unit_lower.unit_lower_inverse();
        let scale: Vec<f64> = self.diagonal.iter().map(|x| rational_to_f64(x).sqrt()).collect();
        Matrix::from_fn(inv.rows(), inv.cols(), |i, j| rational_to_f64(inv.get(i, j)) / scale[i])
    }
}

/// `p/q` text form, or just `p` for integers.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom() == &BigInt::one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p`, `p/q` or a decimal into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::InvalidArgument(format!("'{text}' is not a rational number"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let value = if let Some((p, q)) = body.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        BigRational::new(p, q)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        let digits = |t: &str| t.is_empty() || t.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || !digits(frac) {
            return Err(bad());
        }
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let w: BigInt = if whole.is_empty() { BigInt::zero() } else { whole.parse().map_err(|_| bad())? };
        let f: BigInt = if frac.is_empty() { BigInt::zero() } else { frac.parse().map_err(|_| bad())? };
        BigRational::new(w * &scale + f, scale)
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        BigRational::from_integer(body.parse().map_err(|_| bad())?)
    };
    Ok(if neg { -value } else { value })
}
