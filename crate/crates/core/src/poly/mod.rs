//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Terms live in a hash map keyed by [`ExponentVector`]; every public
//! iteration and the text form use graded lexicographic order, highest
//! degree first.

mod parse;

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub use parse::parse_polynomial;

/// Multi-index `α ∈ ℕⁿ`, one exponent per variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExponentVector(SmallVec<[u32; 8]>);

impl ExponentVector {
    pub fn new(exponents: &[u32]) -> Self {
        ExponentVector(SmallVec::from_slice(exponents))
    }

    pub fn zeros(dimension: usize) -> Self {
        ExponentVector(SmallVec::from_elem(0, dimension))
    }

    /// The exponent vector of the single variable `x_{index+1}`.
    pub fn unit(dimension: usize, index: usize) -> Self {
        let mut e = Self::zeros(dimension);
        e.0[index] = 1;
        e
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    fn add(&self, other: &ExponentVector) -> ExponentVector {
        ExponentVector(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Graded lexicographic comparison with `x1 > x2 > … > xn`.
    pub fn grlex_cmp(&self, other: &ExponentVector) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl std::ops::Index<usize> for ExponentVector {
    type Output = u32;

    fn index(&self, index: usize) -> &u32 {
        &self.0[index]
    }
}

/// Sparse polynomial in `dimension` variables over ℚ.
///
/// No stored coefficient is zero; the zero polynomial has no terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    dimension: usize,
    terms: FxHashMap<ExponentVector, BigRational>,
}

impl Polynomial {
    pub fn zero(dimension: usize) -> Self {
        Polynomial { dimension, terms: FxHashMap::default() }
    }

    pub fn one(dimension: usize) -> Self {
        Self::constant(dimension, BigRational::one())
    }

    pub fn constant(dimension: usize, value: BigRational) -> Self {
        Self::monomial(ExponentVector::zeros(dimension), value)
    }

    /// The variable `x_{index+1}` (zero-based `index`).
    pub fn variable(dimension: usize, index: usize) -> Self {
        assert!(index < dimension, "variable index {index} out of range for dimension {dimension}");
        Self::monomial(ExponentVector::unit(dimension, index), BigRational::one())
    }

    pub fn monomial(exponents: ExponentVector, coefficient: BigRational) -> Self {
        let dimension = exponents.dimension();
        let mut terms = FxHashMap::default();
        if !coefficient.is_zero() {
            terms.insert(exponents, coefficient);
        }
        Polynomial { dimension, terms }
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, merging
    /// like terms and dropping zeros.
    pub fn from_terms<I>(dimension: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ExponentVector, BigRational)>,
    {
        let mut p = Polynomial::zero(dimension);
        for (e, c) in terms {
            if e.dimension() != dimension {
                return Err(Error::DimensionMismatch { expected: dimension, found: e.dimension() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, e: ExponentVector, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Maximum total degree over the stored terms; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(ExponentVector::total_degree).max().unwrap_or(0)
    }

    pub fn coefficient(&self, exponents: &[u32]) -> BigRational {
        self.terms
            .get(&ExponentVector::new(exponents))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.coefficient(&vec![0; self.dimension])
    }

    /// Terms in descending graded lexicographic order.
    pub fn terms(&self) -> Vec<(&ExponentVector, &BigRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| b.0.grlex_cmp(a.0));
        v
    }

    /// Unordered term iterator; cheaper than [`Polynomial::terms`].
    pub fn iter_terms(&self) -> impl Iterator<Item = (&ExponentVector, &BigRational)> {
        self.terms.iter()
    }

    fn check_dimension(&self, other: &Polynomial) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: other.dimension });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dimension(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dimension(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, factor: &BigRational) -> Polynomial {
        if factor.is_zero() {
            return Polynomial::zero(self.dimension);
        }
        Polynomial {
            dimension: self.dimension,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * factor)).collect(),
        }
    }

    /// Exact product.
    ///
    /// Both operands are cleared to integer numerators over a common
    /// denominator so that the inner loop runs on integers and each output
    /// coefficient is normalized once.
    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dimension(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Polynomial::zero(self.dimension));
        }
        let (lhs_den, lhs) = self.integer_form();
        let (rhs_den, rhs) = other.integer_form();
        let (outer, inner) = if lhs.len() <= rhs.len() { (&lhs, &rhs) } else { (&rhs, &lhs) };

        let mut acc: FxHashMap<ExponentVector, BigInt> = FxHashMap::default();
        acc.reserve(inner.len() * 2);
        for (ea, ca) in outer {
            for (eb, cb) in inner {
                let prod = ca * cb;
                match acc.entry(ea.add(eb)) {
                    Entry::Occupied(mut o) => *o.get_mut() += prod,
                    Entry::Vacant(v) => {
                        v.insert(prod);
                    }
                }
            }
        }

        let den = lhs_den * rhs_den;
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| {
                let coeff = if den.is_one() {
                    BigRational::from_integer(c)
                } else {
                    BigRational::new(c, den.clone())
                };
                (e, coeff)
            })
            .collect();
        Ok(Polynomial { dimension: self.dimension, terms })
    }

    /// Common denominator and the matching integer numerators.
    fn integer_form(&self) -> (BigInt, Vec<(&ExponentVector, BigInt)>) {
        let den = self.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let nums = self
            .terms
            .iter()
            .map(|(e, c)| {
                let n = if den.is_one() { c.numer().clone() } else { c.numer() * (&den / c.denom()) };
                (e, n)
            })
            .collect();
        (den, nums)
    }

    /// `p(r·x)`: each coefficient multiplied by `r^|α|`.
    pub fn scale_variables(&self, factor: &BigRational) -> Polynomial {
        let mut out = Polynomial::zero(self.dimension);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * pow_rational(factor, e.total_degree()));
        }
        out
    }

    /// Term-wise partial derivative in the zero-based variable `index`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn partial_derivative(&self, index: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.dimension);
        for (e, c) in &self.terms {
            let k = e.0[index];
            if k == 0 {
                continue;
            }
            let mut de = e.clone();
            de.0[index] -= 1;
            out.add_term(de, c * BigRational::from_integer(BigInt::from(k)));
        }
        out
    }

    /// `t` when every term has total degree `t`, `None` for mixed degrees.
    pub fn homogeneity_degree(&self) -> Result<Option<u32>> {
        let mut degrees = self.terms.keys().map(ExponentVector::total_degree);
        let first = degrees.next().ok_or(Error::ZeroPolynomial)?;
        if degrees.all(|d| d == first) {
            Ok(Some(first))
        } else {
            Ok(None)
        }
    }

    /// Splits `p` into homogeneous parts of degree `1..=deg p`.
    pub fn graded_decompose(&self) -> Result<GradedDecomposition> {
        if !self.constant_term().is_zero() {
            return Err(Error::NonzeroConstant);
        }
        let top = self.degree() as usize;
        let mut parts = vec![Polynomial::zero(self.dimension); top];
        for (e, c) in &self.terms {
            parts[e.total_degree() as usize - 1].add_term(e.clone(), c.clone());
        }
        Ok(GradedDecomposition { parts })
    }

    pub fn evaluate_rational(&self, point: &[BigRational]) -> Result<BigRational> {
        if point.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: point.len() });
        }
        let mut sum = BigRational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (x, &k) in point.iter().zip(e.0.iter()) {
                if k > 0 {
                    term *= pow_rational(x, k);
                }
            }
            sum += term;
        }
        Ok(sum)
    }

    pub fn evaluate_f64(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: point.len() });
        }
        Ok(self.to_f64_evaluator().eval(point))
    }

    /// Floating-point copy of the polynomial for repeated evaluation.
    pub fn to_f64_evaluator(&self) -> FloatPolynomial {
        let terms = self
            .terms()
            .into_iter()
            .map(|(e, c)| (e.0.to_vec(), c.to_f64().unwrap_or(f64::NAN)))
            .collect();
        FloatPolynomial { dimension: self.dimension, terms }
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }
}

/// `base^exp` over ℚ.
pub(crate) fn pow_rational(base: &BigRational, exp: u32) -> BigRational {
    num_traits::pow(base.clone(), exp as usize)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms().into_iter().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let magnitude = c.abs();
            let mut factors = Vec::new();
            for (idx, &k) in e.0.iter().enumerate() {
                match k {
                    0 => {}
                    1 => factors.push(format!("x{}", idx + 1)),
                    _ => factors.push(format!("x{}^{}", idx + 1, k)),
                }
            }
            if factors.is_empty() {
                write!(f, "{magnitude}")?;
            } else if magnitude.is_one() {
                f.write_str(&factors.join("*"))?;
            } else {
                write!(f, "{}*{}", magnitude, factors.join("*"))?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    /// Panics on dimension mismatch; use [`Polynomial::try_add`] otherwise.
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial dimensions differ")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial dimensions differ")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.multiply(rhs).expect("polynomial dimensions differ")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(&-BigRational::one())
    }
}

/// Homogeneous parts `(g_1, …, g_t)` of a polynomial with zero constant term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedDecomposition {
    parts: Vec<Polynomial>,
}

impl GradedDecomposition {
    /// Highest degree `t`.
    pub fn degree(&self) -> usize {
        self.parts.len()
    }

    /// The degree-`k` part, `1 ≤ k ≤ t`.
    pub fn part(&self, k: usize) -> &Polynomial {
        &self.parts[k - 1]
    }

    pub fn parts(&self) -> &[Polynomial] {
        &self.parts
    }

    pub fn reconstruct(&self) -> Polynomial {
        let dim = self.parts.first().map_or(0, Polynomial::dimension);
        self.parts.iter().fold(Polynomial::zero(dim), |acc, p| &acc + p)
    }
}

/// Float evaluator produced by [`Polynomial::to_f64_evaluator`].
#[derive(Clone, Debug)]
pub struct FloatPolynomial {
    dimension: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl FloatPolynomial {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Panics if `point` is shorter than the dimension.
    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (e, c) in &self.terms {
            let mut term = *c;
            for (x, &k) in point.iter().zip(e.iter()) {
                if k > 0 {
                    term *= x.powi(k as i32);
                }
            }
            sum += term;
        }
        sum
    }
}

/// Iterator over `g⁰, g¹, g², …`, each power obtained from the previous one.
pub struct Powers<'a> {
    base: &'a Polynomial,
    next: Option<Polynomial>,
}

impl<'a> Powers<'a> {
    pub fn new(base: &'a Polynomial) -> Self {
        Powers { base, next: Some(Polynomial::one(base.dimension())) }
    }
}

impl Iterator for Powers<'_> {
    type Item = Polynomial;

    fn next(&mut self) -> Option<Polynomial> {
        let current = self.next.take()?;
        self.next = Some(&current * self.base);
        Some(current)
    }
}

/// `[g⁰, g¹, …, g^K]`.
pub fn power_sequence(g: &Polynomial, order: usize) -> Vec<Polynomial> {
    Powers::new(g).take(order + 1).collect()
}
