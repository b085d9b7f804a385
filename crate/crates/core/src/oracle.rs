//! Monte Carlo estimates used as an independent check on the closed-form
//! quantities, and closed-form reference volumes.
//!
//! Sample `i` of a run with seed `s` in dimension `n` is read from the
//! ChaCha8 stream seeded by `s`, starting at word `2·n·i`; each coordinate
//! consumes one 64-bit draw. Sample ranges are processed in fixed-size
//! chunks and merged in chunk order, so results are bit-identical regardless
//! of the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::moments::BoxSpec;
use crate::poly::{FloatPolynomial, Polynomial};

const CHUNK: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    /// Samples that fell in the restriction region.
    pub accepted: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean − reference| ≤ k·stderr`.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr
    }
}

/// Region of the box a sample must fall in to be counted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Restriction {
    None,
    /// `a ≤ Σ_j parts_j(x) ≤ b`.
    SumBand { a: f64, b: f64 },
    /// `0 ≤ parts_j(x) ≤ 1` for every `j`.
    UnitCube,
}

impl Restriction {
    fn contains(&self, values: &[f64]) -> bool {
        match *self {
            Restriction::None => true,
            Restriction::SumBand { a, b } => {
                let s: f64 = values.iter().sum();
                a <= s && s <= b
            }
            Restriction::UnitCube => values.iter().all(|v| (0.0..=1.0).contains(v)),
        }
    }
}

/// Uniform points of `[-r, r]^n` in the documented stream layout.
pub struct BoxSampler {
    rng: ChaCha8Rng,
    radius: f64,
    dimension: usize,
}

impl BoxSampler {
    /// Positioned at sample index `first`.
    pub fn new(bx: &BoxSpec, seed: u64, first: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(u128::from(first) * bx.dimension() as u128 * 2);
        BoxSampler { rng, radius: bx.radius_f64(), dimension: bx.dimension() }
    }

    pub fn next_into(&mut self, point: &mut [f64]) {
        debug_assert_eq!(point.len(), self.dimension);
        for x in point.iter_mut() {
            let u: f64 = self.rng.random();
            *x = self.radius * (2.0 * u - 1.0);
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let mut p = vec![0.0; self.dimension];
        self.next_into(&mut p);
        p
    }
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: u64,
    accepted: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return Moments { accepted: self.accepted + other.accepted, ..other };
        }
        if other.count == 0 {
            return Moments { accepted: self.accepted + other.accepted, ..self };
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64 / count as f64);
        Moments { count, accepted: self.accepted + other.accepted, mean, m2 }
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Runs `f` on every sample; `f` returns `None` to skip a sample (it then
/// does not enter the mean) and `Some((value, accepted))` otherwise.
fn accumulate<F>(bx: &BoxSpec, samples: u64, seed: u64, f: F) -> Moments
where
    F: Fn(&[f64]) -> Option<(f64, bool)> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(samples);
            let mut sampler = BoxSampler::new(bx, seed, start);
            let mut point = vec![0.0; bx.dimension()];
            let mut acc = Moments::default();
            for _ in start..end {
                sampler.next_into(&mut point);
                if let Some((v, hit)) = f(&point) {
                    acc.push(v);
                    acc.accepted += u64::from(hit);
                }
            }
            acc
        })
        .collect();
    partial.into_iter().fold(Moments::default(), Moments::merge)
}

fn check_parts(parts: &[Polynomial], bx: &BoxSpec) -> Result<Vec<FloatPolynomial>> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("at least one polynomial is required".into()));
    }
    for p in parts {
        if p.dimension() != bx.dimension() {
            return Err(Error::DimensionMismatch { expected: bx.dimension(), found: p.dimension() });
        }
    }
    Ok(parts.iter().map(Polynomial::to_f64_evaluator).collect())
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    Ok(())
}

fn monomial(values: &[f64], alpha: &[u32]) -> f64 {
    values.iter().zip(alpha).map(|(v, &k)| v.powi(k as i32)).product()
}

/// Volume of `{x ∈ B : a ≤ g(x) ≤ b}`.
pub fn mc_volume(g: &Polynomial, bx: &BoxSpec, a: f64, b: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let eval = check_parts(std::slice::from_ref(g), bx)?.remove(0);
    let acc = accumulate(bx, samples, seed, |x| {
        let v = eval.eval(x);
        let hit = a <= v && v <= b;
        Some((if hit { 1.0 } else { 0.0 }, hit))
    });
    let scale = bx.normalization_f64();
    let p = acc.accepted as f64 / samples as f64;
    Ok(McEstimate {
        mean: p * scale,
        stderr: (p * (1.0 - p) / samples as f64).sqrt() * scale,
        samples,
        accepted: acc.accepted,
        seed,
    })
}

/// `E[1_R(X)·∏_j parts_j(X)^{α_j}]` for `X` uniform on the box: the moment
/// of the pushforward measure restricted to `R`, with mass not normalized.
///
/// Fails with [`Error::DegenerateEstimate`] when no sample lands in `R`.
pub fn mc_pushforward_moment(
    parts: &[Polynomial],
    bx: &BoxSpec,
    alpha: &[u32],
    restriction: Restriction,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let terms = [(alpha.to_vec(), 1.0)];
    mc_moment_functional(parts, bx, &terms, restriction, samples, seed)
}

/// `E[1_R(X)·Σ_α c_α·parts(X)^α]`, estimated per sample so the standard
/// error reflects the correlation between the moments involved.
pub fn mc_moment_functional(
    parts: &[Polynomial],
    bx: &BoxSpec,
    terms: &[(Vec<u32>, f64)],
    restriction: Restriction,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(samples)?;
    let evals = check_parts(parts, bx)?;
    if let Some((alpha, _)) = terms.iter().find(|(a, _)| a.len() != parts.len()) {
        return Err(Error::DimensionMismatch { expected: parts.len(), found: alpha.len() });
    }
    let acc = accumulate(bx, samples, seed, |x| {
        let values: Vec<f64> = evals.iter().map(|p| p.eval(x)).collect();
        if !restriction.contains(&values) {
            return Some((0.0, false));
        }
        Some((terms.iter().map(|(alpha, c)| c * monomial(&values, alpha)).sum(), true))
    });
    if acc.accepted == 0 {
        return Err(Error::DegenerateEstimate);
    }
    Ok(McEstimate { mean: acc.mean, stderr: acc.stderr(), samples, accepted: acc.accepted, seed })
}

/// `E[∏_j parts_j(X)^{α_j} | X ∈ R]`: the moment of the restricted measure
/// divided by its mass.
pub fn mc_conditional_moment(
    parts: &[Polynomial],
    bx: &BoxSpec,
    alpha: &[u32],
    restriction: Restriction,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(samples)?;
    let evals = check_parts(parts, bx)?;
    if alpha.len() != parts.len() {
        return Err(Error::DimensionMismatch { expected: parts.len(), found: alpha.len() });
    }
    let acc = accumulate(bx, samples, seed, |x| {
        let values: Vec<f64> = evals.iter().map(|p| p.eval(x)).collect();
        restriction.contains(&values).then(|| (monomial(&values, alpha), true))
    });
    if acc.accepted == 0 {
        return Err(Error::DegenerateEstimate);
    }
    Ok(McEstimate { mean: acc.mean, stderr: acc.stderr(), samples, accepted: acc.accepted, seed })
}

/// Volume of the Euclidean unit ball, `π^{n/2}/Γ(1 + n/2)`.
pub fn ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    (half * std::f64::consts::PI.ln() - ln_gamma(1.0 + half)).exp()
}
