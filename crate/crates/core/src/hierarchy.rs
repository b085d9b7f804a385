//! The degree-by-degree driver: for `d = 1, 2, …` it extends the pushforward
//! moments to order `2d`, assembles the pencil and records
//! `τ_d = λ_min(M_d(#λ), M*_d)` together with `(2r)^n·τ_d`.

use std::fmt;

use num_rational::BigRational;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::eig::{gen_eig_min, ReductionSide};
use crate::error::{Error, Result};
use crate::hankel::assemble_pencil;
use crate::matrix::{rational_to_f64, BasisKind};
use crate::moments::{coefficient_bound, BoxSpec, PushforwardMoments};
use crate::oracle::BoxSampler;
use crate::poly::Polynomial;

/// Relative slack allowed by the monotonicity audit.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HierarchyOptions {
    pub d_max: usize,
    pub basis: BasisKind,
    /// Stop once `|τ_d − τ_{d−1}| / τ_d` stays below this for two
    /// consecutive degrees. `None` always runs to `d_max`.
    pub plateau_tol: Option<f64>,
    /// Points sampled for the nonnegativity and containment checks; zero
    /// disables both.
    pub check_samples: u64,
    pub seed: u64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            d_max: 8,
            basis: BasisKind::default(),
            plateau_tol: Some(1e-4),
            check_samples: 10_000,
            seed: 0,
        }
    }
}

impl HierarchyOptions {
    pub fn new(d_max: usize, basis: BasisKind) -> Self {
        HierarchyOptions { d_max, basis, ..Self::default() }
    }

    /// Runs every degree up to `d_max`.
    pub fn exhaustive(mut self) -> Self {
        self.plateau_tol = None;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum DegreeStatus {
    Computed,
    /// The solve at this degree failed.
    Failed(String),
    /// Not attempted after an earlier failure.
    Unavailable,
    /// Not attempted because the plateau rule stopped the run.
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeRecord {
    pub d: usize,
    pub tau: Option<f64>,
    pub scaled_estimate: Option<f64>,
    pub residual: Option<f64>,
    pub condition_estimate: Option<f64>,
    pub reduction_side: Option<ReductionSide>,
    pub reliable: bool,
    pub status: DegreeStatus,
}

impl DegreeRecord {
    fn empty(d: usize, status: DegreeStatus) -> Self {
        DegreeRecord {
            d,
            tau: None,
            scaled_estimate: None,
            residual: None,
            condition_estimate: None,
            reduction_side: None,
            reliable: false,
            status,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Warning {
    /// `g` took a negative value at a sampled point.
    NegativeValue { point: Vec<f64>, value: f64 },
    /// A point on the boundary of the box lies in the sub-level set, so the
    /// set is not contained in the box interior.
    NotContained { point: Vec<f64>, value: f64 },
    IllConditioned { d: usize, condition_estimate: f64, suggestion: String },
    NotMonotone { d: usize, previous: f64, current: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NegativeValue { point, value } => {
                write!(f, "g is negative ({value:e}) at {point:?}; the volume bound assumes g >= 0")
            }
            Warning::NotContained { point, value } => write!(
                f,
                "g = {value} <= 1 at box boundary point {point:?}; the sub-level set leaves the box, enlarge --radius"
            ),
            Warning::IllConditioned { d, condition_estimate, suggestion } => write!(
                f,
                "degree {d} is ill-conditioned (estimate {condition_estimate:.2e}); {suggestion}"
            ),
            Warning::NotMonotone { d, previous, current } => {
                write!(f, "tau increased from {previous} to {current} at degree {d}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "d")]
pub enum StopReason {
    Plateau(usize),
    NumericalFailure(usize),
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub n: usize,
    pub t: u32,
    pub radius: BigRational,
    pub basis: BasisKind,
    pub records: Vec<DegreeRecord>,
    /// Scaled estimate of the last reliable degree.
    pub final_estimate: Option<f64>,
    pub monotone: bool,
    pub stop: Option<StopReason>,
    pub warnings: Vec<Warning>,
    /// Number of powers `g^k` expanded to produce the moments.
    pub moment_evaluations: usize,
}

impl ConvergenceReport {
    pub fn record(&self, d: usize) -> Option<&DegreeRecord> {
        self.records.iter().find(|r| r.d == d)
    }

    /// Scaled estimates of the computed degrees, in order.
    pub fn scaled_estimates(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.scaled_estimate).collect()
    }

    /// `Γ(1 + n/t)·final_estimate`, the matching upper bound on `∫ exp(−g)`.
    pub fn integral_discriminant(&self) -> Option<f64> {
        self.final_estimate.map(|v| integral_discriminant(v, self.n, self.t))
    }
}

/// `∫_{ℝⁿ} exp(−g(x)) dx = Γ(1 + n/t)·vol({g ≤ 1})` for `g` positive and
/// homogeneous of degree `t`.
pub fn integral_discriminant(vol: f64, n: usize, t: u32) -> f64 {
    if vol == 0.0 {
        return 0.0;
    }
    ln_gamma(1.0 + n as f64 / f64::from(t)).exp() * vol
}

/// Validates `g` and returns its homogeneous degree.
pub fn homogeneous_even_degree(g: &Polynomial) -> Result<u32> {
    let t = g.homogeneity_degree()?.ok_or(Error::NotHomogeneous)?;
    if t % 2 == 1 {
        return Err(Error::OddDegree(t));
    }
    Ok(t)
}

/// `τ_{d+1} ≤ τ_d·(1 + slack)` over consecutive reliable records.
pub fn is_monotone(records: &[DegreeRecord]) -> bool {
    let taus: Vec<f64> = records.iter().filter(|r| r.reliable).filter_map(|r| r.tau).collect();
    taus.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK))
}

/// Samples the interior for negative values of `g` and the boundary of the
/// box for points with `g ≤ 1`.
pub fn sampling_checks(g: &Polynomial, bx: &BoxSpec, samples: u64, seed: u64) -> Vec<Warning> {
    let mut warnings = Vec::new();
    if samples == 0 {
        return warnings;
    }
    let eval = g.to_f64_evaluator();
    let tol = 1e-12 * rational_to_f64(&coefficient_bound(g, bx)).max(1.0);
    let r = bx.radius_f64();
    let n = bx.dimension();
    let mut sampler = BoxSampler::new(bx, seed, 0);
    let mut point = vec![0.0; n];
    let mut negative = None;
    let mut outside = None;
    for i in 0..samples {
        sampler.next_into(&mut point);
        let v = eval.eval(&point);
        if negative.is_none() && v < -tol {
            negative = Some(Warning::NegativeValue { point: point.clone(), value: v });
        }
        // Push the point onto a face chosen by the sample index.
        let axis = (i as usize) % n;
        point[axis] = if point[axis] >= 0.0 { r } else { -r };
        let v = eval.eval(&point);
        if outside.is_none() && v <= 1.0 {
            outside = Some(Warning::NotContained { point: point.clone(), value: v });
        }
        if negative.is_some() && outside.is_some() {
            break;
        }
    }
    warnings.extend(negative);
    warnings.extend(outside);
    warnings
}

fn suggestion_for(basis: &BasisKind) -> String {
    match basis {
        BasisKind::OrthonormalPushforward => "the result is at the limit of double precision".into(),
        _ => "re-run with --basis orthonormal-push or --basis chebyshev".into(),
    }
}

/// Computes `τ_1, …, τ_{d_max}` for the sub-level set `{g ≤ 1}` inside the
/// box.
///
/// A failed solve is recorded on its degree; after a definiteness or
/// convergence failure the remaining degrees are marked unavailable.
pub fn run_hierarchy(g: &Polynomial, bx: &BoxSpec, opts: &HierarchyOptions) -> Result<ConvergenceReport> {
    if g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if g.dimension() != bx.dimension() {
        return Err(Error::DimensionMismatch { expected: bx.dimension(), found: g.dimension() });
    }
    if opts.d_max == 0 {
        return Err(Error::InvalidArgument("d_max must be at least 1".into()));
    }
    let t = homogeneous_even_degree(g)?;
    let n = bx.dimension();
    let n32 = u32::try_from(n).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    let scale = bx.normalization_f64();

    let mut warnings = sampling_checks(g, bx, opts.check_samples, opts.seed);
    let mut engine = PushforwardMoments::new(g, bx)?;
    let mut records: Vec<DegreeRecord> = Vec::with_capacity(opts.d_max);
    let mut stop = None;
    let mut small_steps = 0;

    for d in 1..=opts.d_max {
        if let Some(reason) = &stop {
            let status = match reason {
                StopReason::Plateau(_) => DegreeStatus::Skipped,
                StopReason::NumericalFailure(_) => DegreeStatus::Unavailable,
            };
            records.push(DegreeRecord::empty(d, status));
            continue;
        }
        engine.extend_to(2 * d)?;
        let solved = assemble_pencil(engine.values(), n32, t, d, &opts.basis)
            .and_then(|p| gen_eig_min(&p.pushforward, &p.model));
        let res = match solved {
            Ok(res) => res,
            Err(err) => {
                if matches!(err, Error::NotPositiveDefinite { .. } | Error::NoConvergence(_)) {
                    stop = Some(StopReason::NumericalFailure(d));
                }
                records.push(DegreeRecord::empty(d, DegreeStatus::Failed(err.to_string())));
                continue;
            }
        };
        let reliable = res.reliable && res.tau > 0.0;
        if res.ill_conditioned {
            warnings.push(Warning::IllConditioned {
                d,
                condition_estimate: res.condition_estimate,
                suggestion: suggestion_for(&opts.basis),
            });
        }
        if reliable {
            if let Some(prev) = records.iter().rev().find(|r| r.reliable).and_then(|r| r.tau) {
                if res.tau > prev * (1.0 + MONOTONE_SLACK) {
                    warnings.push(Warning::NotMonotone { d, previous: prev, current: res.tau });
                }
                if let Some(tol) = opts.plateau_tol {
                    if ((res.tau - prev) / res.tau).abs() < tol {
                        small_steps += 1;
                    } else {
                        small_steps = 0;
                    }
                }
            }
        }
        records.push(DegreeRecord {
            d,
            tau: Some(res.tau),
            scaled_estimate: Some(scale * res.tau),
            residual: Some(res.residual),
            condition_estimate: Some(res.condition_estimate),
            reduction_side: Some(res.reduction_side),
            reliable,
            status: DegreeStatus::Computed,
        });
        if small_steps >= 2 {
            stop = Some(StopReason::Plateau(d));
        }
    }

    let final_estimate = records.iter().rev().find(|r| r.reliable).and_then(|r| r.scaled_estimate);
    let monotone = is_monotone(&records);
    Ok(ConvergenceReport {
        n,
        t,
        radius: bx.radius().clone(),
        basis: opts.basis.clone(),
        records,
        final_estimate,
        monotone,
        stop,
        warnings,
        moment_evaluations: engine.evaluations(),
    })
}
