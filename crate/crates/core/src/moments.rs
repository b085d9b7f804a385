//! Closed-form moments of the normalized Lebesgue measure on a box
//! `B = [-r, r]^n` and of its pushforward under polynomial maps.
//!
//! The normalized measure `λ` has mass one, so `vol(K) = (2r)^n · λ(K)`.
//! A monomial integrates to `∏ r^{α_i}/(α_i+1)` when every `α_i` is even and
//! to zero otherwise. The pushforward moment `#λ_k = ∫ g^k dλ` is the same
//! functional applied to the expansion of `g^k`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::poly::{pow_rational, Polynomial, Powers};

/// The box `[-r, r]^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxSpec {
    dimension: usize,
    radius: BigRational,
}

impl BoxSpec {
    pub fn new(dimension: usize, radius: BigRational) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("box dimension must be positive".into()));
        }
        if !radius.is_positive() {
            return Err(Error::InvalidArgument(format!("box radius must be positive, got {radius}")));
        }
        Ok(BoxSpec { dimension, radius })
    }

    /// `[-1, 1]^n`.
    pub fn unit(dimension: usize) -> Self {
        BoxSpec::new(dimension, BigRational::one()).expect("positive dimension")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> &BigRational {
        &self.radius
    }

    pub fn radius_f64(&self) -> f64 {
        self.radius.to_f64().unwrap_or(f64::NAN)
    }

    /// `(2r)^n`, the Lebesgue volume of the box.
    pub fn normalization(&self) -> BigRational {
        pow_rational(&(&self.radius * BigRational::from_integer(2.into())), self.dimension as u32)
    }

    pub fn normalization_f64(&self) -> f64 {
        self.normalization().to_f64().unwrap_or(f64::NAN)
    }
}

/// `2^{-n} ∫_B x^α dx` scaled to the box radius.
pub fn box_monomial_moment(alpha: &[u32], bx: &BoxSpec) -> Result<BigRational> {
    if alpha.len() != bx.dimension {
        return Err(Error::DimensionMismatch { expected: bx.dimension, found: alpha.len() });
    }
    if alpha.iter().any(|a| a % 2 == 1) {
        return Ok(BigRational::zero());
    }
    let den = alpha.iter().fold(BigInt::one(), |acc, &a| acc * BigInt::from(a + 1));
    let deg: u32 = alpha.iter().sum();
    Ok(pow_rational(&bx.radius, deg) / BigRational::from_integer(den))
}

/// `∫_B p dλ` for the normalized measure on the box.
///
/// Terms are bucketed by `(∏(α_i+1), |α|)` so that only a handful of
/// rational divisions happen regardless of the number of terms.
pub fn box_expectation(p: &Polynomial, bx: &BoxSpec) -> Result<BigRational> {
    if p.dimension() != bx.dimension {
        return Err(Error::DimensionMismatch { expected: bx.dimension, found: p.dimension() });
    }
    let mut buckets: FxHashMap<(u128, u32), BigRational> = FxHashMap::default();
    let mut overflow = BigRational::zero();
    for (e, c) in p.iter_terms() {
        let exps = e.as_slice();
        if exps.iter().any(|a| a % 2 == 1) {
            continue;
        }
        let den = exps.iter().try_fold(1u128, |acc, &a| acc.checked_mul(u128::from(a) + 1));
        match den {
            Some(den) => {
                let slot = buckets.entry((den, e.total_degree())).or_insert_with(BigRational::zero);
                *slot += c;
            }
            None => overflow += c * box_monomial_moment(exps, bx)?,
        }
    }
    let mut total = overflow;
    for ((den, deg), sum) in buckets {
        total += sum * pow_rational(&bx.radius, deg) / BigRational::from_integer(BigInt::from(den));
    }
    Ok(total)
}

/// Moments `(#λ_0, …, #λ_K)` of the pushforward of the box measure by `g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentSequence {
    pub box_spec: BoxSpec,
    pub map_degree: u32,
    pub values: Vec<BigRational>,
}

impl MomentSequence {
    /// Highest available order `K`.
    pub fn order(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn get(&self, k: usize) -> Option<&BigRational> {
        self.values.get(k)
    }
}

/// Incrementally extended pushforward moments.
///
/// Only the latest power of `g` is kept, and every `#λ_k` is evaluated
/// exactly once no matter how often the order is raised.
#[derive(Clone, Debug)]
pub struct PushforwardMoments {
    g: Polynomial,
    box_spec: BoxSpec,
    current: Polynomial,
    values: Vec<BigRational>,
    evaluations: usize,
}

impl PushforwardMoments {
    pub fn new(g: &Polynomial, bx: &BoxSpec) -> Result<Self> {
        if g.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if g.dimension() != bx.dimension {
            return Err(Error::DimensionMismatch { expected: bx.dimension, found: g.dimension() });
        }
        let one = Polynomial::one(g.dimension());
        let first = box_expectation(&one, bx)?;
        Ok(PushforwardMoments {
            g: g.clone(),
            box_spec: bx.clone(),
            current: one,
            values: vec![first],
            evaluations: 1,
        })
    }

    pub fn extend_to(&mut self, order: usize) -> Result<()> {
        while self.values.len() <= order {
            self.current = self.current.multiply(&self.g)?;
            self.values.push(box_expectation(&self.current, &self.box_spec)?);
            self.evaluations += 1;
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    /// Number of moment evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn sequence(&self) -> MomentSequence {
        MomentSequence {
            box_spec: self.box_spec.clone(),
            map_degree: self.g.degree(),
            values: self.values.clone(),
        }
    }
}

/// `#λ_k = ∫_B g^k dλ` for `k = 0..=order`, exactly.
pub fn pushforward_moments(g: &Polynomial, bx: &BoxSpec, order: usize) -> Result<MomentSequence> {
    let mut engine = PushforwardMoments::new(g, bx)?;
    engine.extend_to(order)?;
    Ok(engine.sequence())
}

/// Moments of the restriction of the pushforward to `[0, 1]` relative to
/// its mass: `φ*_j / φ*_0 = n / (n + j t)`.
///
/// Panics when `n` or `t` is zero.
pub fn model_moment(n: u32, t: u32, j: u32) -> BigRational {
    assert!(n >= 1 && t >= 1, "model moments need n >= 1 and t >= 1");
    let n = BigInt::from(n);
    let den = &n + BigInt::from(j) * BigInt::from(t);
    BigRational::new(n, den)
}

/// Certified upper bound `Σ |c_α| r^{|α|}` on `max_B |g|`.
pub fn coefficient_bound(g: &Polynomial, bx: &BoxSpec) -> BigRational {
    g.iter_terms()
        .map(|(e, c)| c.abs() * pow_rational(&bx.radius, e.total_degree()))
        .fold(BigRational::zero(), |a, b| a + b)
}

/// All multi-indices in `ℕ^arity` of total degree at most `max_degree`,
/// ordered by degree and then with the first coordinate decreasing.
pub fn multi_indices(arity: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, arity: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == arity {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=remaining).rev() {
            prefix.push(a);
            fill(prefix, arity, remaining - a, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if arity == 0 {
        out.push(Vec::new());
        return out;
    }
    for deg in 0..=max_degree {
        fill(&mut Vec::with_capacity(arity), arity, deg, &mut out);
    }
    out
}

/// Moments `#λ_α = ∫ ∏_j g_j^{α_j} dλ` of the pushforward by `(g_1, …, g_m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiMomentTable {
    pub box_spec: BoxSpec,
    pub arity: usize,
    pub order: u32,
    pub values: BTreeMap<Vec<u32>, BigRational>,
}

impl MultiMomentTable {
    pub fn get(&self, alpha: &[u32]) -> Option<&BigRational> {
        self.values.get(alpha)
    }
}

pub fn pushforward_moments_multi(
    parts: &[Polynomial],
    bx: &BoxSpec,
    order: u32,
) -> Result<MultiMomentTable> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("at least one map component is required".into()));
    }
    for p in parts {
        if p.dimension() != bx.dimension {
            return Err(Error::DimensionMismatch { expected: bx.dimension, found: p.dimension() });
        }
    }
    let powers: Vec<Vec<Polynomial>> =
        parts.iter().map(|p| Powers::new(p).take(order as usize + 1).collect()).collect();

    let mut values = BTreeMap::new();
    for alpha in multi_indices(parts.len(), order) {
        let mut product = Polynomial::one(bx.dimension);
        for (j, &a) in alpha.iter().enumerate() {
            if a > 0 {
                product = product.multiply(&powers[j][a as usize])?;
            }
        }
        values.insert(alpha, box_expectation(&product, bx)?);
    }
    Ok(MultiMomentTable { box_spec: bx.clone(), arity: parts.len(), order, values })
}
