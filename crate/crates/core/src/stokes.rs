//! Linear moment relations obtained from the divergence theorem with the
//! vector field `X(x) = x`, and the data of the moment relaxations they
//! strengthen, exported for external SDP solvers.
//!
//! For a map `z = (g_1(x), g_2(x))` and a polynomial `h(z)` vanishing on the
//! boundary of the image set, `∫_K div(x·h(g(x))) dx = 0`. Expanding the
//! divergence with `⟨x, ∇g_k⟩ = deg(g_k)·g_k` turns this into a polynomial
//! `q(z)` whose integral against the restricted pushforward measure is zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{format_rational, parse_rational, rational_to_f64, BasisKind, ExactSymMatrix};
use crate::moments::{multi_indices, pushforward_moments_multi, BoxSpec, MultiMomentTable};
use crate::poly::{ExponentVector, Polynomial};

fn int(k: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

/// `Σ_α c_α·φ_α = 0` over multi-indices `α ∈ ℕ^arity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearMomentConstraint {
    pub label: String,
    pub arity: usize,
    pub coefficients: BTreeMap<Vec<u32>, BigRational>,
}

impl LinearMomentConstraint {
    /// Reads the coefficients of `q`; one variable of `q` per coordinate.
    pub fn from_polynomial(label: impl Into<String>, q: &Polynomial) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let coefficients = q.iter_terms().map(|(e, c)| (e.as_slice().to_vec(), c.clone())).collect();
        Ok(LinearMomentConstraint { label: label.into(), arity: q.dimension(), coefficients })
    }

    pub fn degree(&self) -> u32 {
        self.coefficients.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, alpha: &[u32]) -> BigRational {
        self.coefficients.get(alpha).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `Σ_α c_α·φ_α` for an exact moment functional.
    pub fn apply(&self, mut moment: impl FnMut(&[u32]) -> BigRational) -> BigRational {
        self.coefficients.iter().map(|(a, c)| c * moment(a)).fold(BigRational::zero(), |x, y| x + y)
    }

    /// Coefficients rounded to doubles, in multi-index order.
    pub fn terms_f64(&self) -> Vec<(Vec<u32>, f64)> {
        self.coefficients.iter().map(|(a, c)| (a.clone(), rational_to_f64(c))).collect()
    }

    pub fn scale(&self, factor: &BigRational) -> Self {
        LinearMomentConstraint {
            label: self.label.clone(),
            arity: self.arity,
            coefficients: self.coefficients.iter().map(|(a, c)| (a.clone(), c * factor)).collect(),
        }
    }
}

fn z(k: usize) -> Polynomial {
    Polynomial::variable(2, k)
}

fn zpow(i: u32, j: u32) -> Polynomial {
    Polynomial::monomial(ExponentVector::new(&[i, j]), BigRational::one())
}

fn pow(p: &Polynomial, k: u32) -> Polynomial {
    (0..k).fold(Polynomial::one(p.dimension()), |acc, _| &acc * p)
}

fn constant(c: BigRational) -> Polynomial {
    Polynomial::constant(2, c)
}

/// The boundary polynomial `(b − z1 − z2)(z1 + z2 − a)` of the band
/// `a ≤ z1 + z2 ≤ b`.
pub fn band_polynomial(a: &BigRational, b: &BigRational) -> Polynomial {
    let s = &z(0) + &z(1);
    &(&constant(b.clone()) - &s) * &(&s - &constant(a.clone()))
}

/// `q_ij` for `g = g_1 + g_2` with `g_k` homogeneous of degree `k`:
///
/// `(n+i+2j)·z1^i z2^j (b−z1−z2)(z1+z2−a) + (z1+2z2)·z1^i z2^j (a+b−2z1−2z2)`.
pub fn stokes_poly_qij(n: u32, a: &BigRational, b: &BigRational, i: u32, j: u32) -> Result<Polynomial> {
    if a >= b {
        return Err(Error::InvalidArgument(format!("band requires a < b, got a = {a}, b = {b}")));
    }
    let m = zpow(i, j);
    let weight = int(i64::from(n) + i64::from(i) + 2 * i64::from(j));
    let first = (&m * &band_polynomial(a, b)).scale(&weight);
    let euler = &z(0) + &z(1).scale(&int(2));
    let slope = &constant(a + b) - &(&z(0) + &z(1)).scale(&int(2));
    Ok(&first + &(&(&euler * &m) * &slope))
}

/// One relation per `(i, j)` with `i + j + 2 ≤ 2d`.
pub fn stokes_constraints_nonhomog(n: u32, a: &BigRational, b: &BigRational, d: usize) -> Result<Vec<LinearMomentConstraint>> {
    if d == 0 {
        return Ok(Vec::new());
    }
    multi_indices(2, 2 * d as u32 - 2)
        .into_iter()
        .map(|ij| {
            let q = stokes_poly_qij(n, a, b, ij[0], ij[1])?;
            LinearMomentConstraint::from_polynomial(format!("q[{},{}]", ij[0], ij[1]), &q)
        })
        .collect()
}

/// `q_ijkl` for two homogeneous maps of degrees `t1`, `t2` with image in
/// `[0,1]²`, using `h = z1^i z2^j (1−z1)^k (1−z2)^l`.
pub fn stokes_poly_qijkl(n: u32, t1: u32, t2: u32, i: u32, j: u32, k: u32, l: u32) -> Result<Polynomial> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidArgument("k and l must both be at least 1".into()));
    }
    let one = Polynomial::one(2);
    let u1 = &one - &z(0);
    let u2 = &one - &z(1);
    let weight = int(i64::from(n) + i64::from(i) * i64::from(t1) + i64::from(j) * i64::from(t2));
    let main = (&(&zpow(i, j) * &pow(&u1, k)) * &pow(&u2, l)).scale(&weight);
    let d1 = (&(&zpow(i + 1, j) * &pow(&u1, k - 1)) * &pow(&u2, l)).scale(&int(i64::from(k) * i64::from(t1)));
    let d2 = (&(&zpow(i, j + 1) * &pow(&u1, k)) * &pow(&u2, l - 1)).scale(&int(i64::from(l) * i64::from(t2)));
    Ok(&(&main - &d1) - &d2)
}

pub fn stokes_constraints_multihomog(n: u32, t1: u32, t2: u32, i: u32, j: u32, k: u32, l: u32) -> Result<LinearMomentConstraint> {
    let q = stokes_poly_qijkl(n, t1, t2, i, j, k, l)?;
    LinearMomentConstraint::from_polynomial(format!("q[{i},{j},{k},{l}]"), &q)
}

/// Every `q_ijkl` with `k, l ≥ 1` and `i + j + k + l ≤ max_degree`.
pub fn stokes_constraints_multihomog_all(n: u32, t1: u32, t2: u32, max_degree: u32) -> Result<Vec<LinearMomentConstraint>> {
    let mut out = Vec::new();
    for ijkl in multi_indices(4, max_degree) {
        let [i, j, k, l] = ijkl[..] else { unreachable!() };
        if k >= 1 && l >= 1 {
            out.push(stokes_constraints_multihomog(n, t1, t2, i, j, k, l)?);
        }
    }
    Ok(out)
}

/// `constant + Σ_v coefficient_v·φ_v`, with `v` indexing
/// [`SdpProblem::variables`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AffineForm {
    pub constant: BigRational,
    pub terms: BTreeMap<usize, BigRational>,
}

impl AffineForm {
    fn add_term(&mut self, var: usize, c: BigRational) {
        let slot = self.terms.entry(var).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&var);
        }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        rational_to_f64(&self.constant)
            + self.terms.iter().map(|(&v, c)| rational_to_f64(c) * values[v]).sum::<f64>()
    }
}

/// A linear matrix inequality `Σ φ_v·A_v + C ⪰ 0`, stored as a dense
/// symmetric array of affine forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsdBlock {
    pub name: String,
    pub size: usize,
    entries: Vec<AffineForm>,
}

impl PsdBlock {
    fn new(name: impl Into<String>, size: usize, mut f: impl FnMut(usize, usize) -> AffineForm) -> Self {
        let mut entries = vec![AffineForm::default(); size * size];
        for i in 0..size {
            for j in i..size {
                let e = f(i, j);
                entries[j * size + i] = e.clone();
                entries[i * size + j] = e;
            }
        }
        PsdBlock { name: name.into(), size, entries }
    }

    pub fn entry(&self, i: usize, j: usize) -> &AffineForm {
        &self.entries[i * self.size + j]
    }

    /// The constant part `C`.
    pub fn constant_matrix(&self) -> ExactSymMatrix {
        ExactSymMatrix::from_fn(self.size, BasisKind::Monomial, |i, j| self.entry(i, j).constant.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpKind {
    /// Band `a ≤ g ≤ b` for `g = g_1 + g_2`.
    Nonhomogeneous,
    /// Two homogeneous maps with image in `[0,1]²`.
    Multihomogeneous,
}

/// Moment relaxation over measures `φ` on `ℝ²`:
/// maximize `φ_0` subject to every block being PSD and every equality.
///
/// Blocks: the moment matrix `M_d(φ)`, the dominance block
/// `M_d(#λ) − M_d(φ)`, and localizing blocks of order `d − 1` for the
/// polynomials describing the support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdpProblem {
    pub kind: SdpKind,
    pub d: usize,
    /// Problem parameters as exact strings (`n`, `a`, `b`, `t1`, `t2`, …).
    pub parameters: BTreeMap<String, String>,
    /// Multi-index of each variable; variable 0 is `φ_0`, the objective.
    pub variables: Vec<Vec<u32>>,
    pub pushforward: MultiMomentTable,
    pub blocks: Vec<PsdBlock>,
    pub equalities: Vec<LinearMomentConstraint>,
}

fn add_multi(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct Layout {
    variables: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, usize>,
}

impl Layout {
    fn new(d: usize) -> Self {
        let variables = multi_indices(2, 2 * d as u32);
        let index = variables.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Layout { variables, index }
    }

    fn var(&self, alpha: &[u32]) -> usize {
        self.index[alpha]
    }

    fn moment_block(&self, d: usize) -> PsdBlock {
        let basis = multi_indices(2, d as u32);
        PsdBlock::new("moment", basis.len(), |i, j| {
            let mut f = AffineForm::default();
            f.add_term(self.var(&add_multi(&basis[i], &basis[j])), BigRational::one());
            f
        })
    }

    fn dominance_block(&self, d: usize, table: &MultiMomentTable) -> PsdBlock {
        let basis = multi_indices(2, d as u32);
        PsdBlock::new("dominance", basis.len(), |i, j| {
            let alpha = add_multi(&basis[i], &basis[j]);
            let mut f = AffineForm { constant: table.values[&alpha].clone(), ..AffineForm::default() };
            f.add_term(self.var(&alpha), -BigRational::one());
            f
        })
    }

    fn localizing_block(&self, name: &str, d: usize, p: &Polynomial) -> PsdBlock {
        let basis = multi_indices(2, d as u32 - 1);
        PsdBlock::new(name, basis.len(), |i, j| {
            let mut f = AffineForm::default();
            for (gamma, c) in p.iter_terms() {
                let alpha = add_multi(&add_multi(&basis[i], &basis[j]), gamma.as_slice());
                f.add_term(self.var(&alpha), c.clone());
            }
            f
        })
    }
}

/// Relaxation for the band `a ≤ g ≤ b` with `g = g_1 + g_2` of degree 2.
pub fn build_sdp_nonhomog(g: &Polynomial, bx: &BoxSpec, a: &BigRational, b: &BigRational, d: usize) -> Result<SdpProblem> {
    if d == 0 {
        return Err(Error::InvalidArgument("relaxation order must be at least 1".into()));
    }
    if a >= b {
        return Err(Error::InvalidArgument(format!("band requires a < b, got a = {a}, b = {b}")));
    }
    if g.dimension() != bx.dimension() {
        return Err(Error::DimensionMismatch { expected: bx.dimension(), found: g.dimension() });
    }
    let parts = g.graded_decompose()?;
    if parts.degree() != 2 {
        return Err(Error::Unsupported(format!(
            "only degree-2 polynomials are supported here, got degree {}",
            parts.degree()
        )));
    }
    if parts.part(1).is_zero() || parts.part(2).is_zero() {
        return Err(Error::Unsupported(
            "polynomial is homogeneous; use the eigenvalue hierarchy (`approx`) instead".into(),
        ));
    }
    let n = u32::try_from(bx.dimension()).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    let table = pushforward_moments_multi(parts.parts(), bx, 2 * d as u32 + 2)?;
    let layout = Layout::new(d);
    let blocks = vec![
        layout.moment_block(d),
        layout.dominance_block(d, &table),
        layout.localizing_block("localizing band", d, &band_polynomial(a, b)),
    ];
    let mut parameters = BTreeMap::new();
    parameters.insert("n".to_string(), n.to_string());
    parameters.insert("a".to_string(), format_rational(a));
    parameters.insert("b".to_string(), format_rational(b));
    parameters.insert("radius".to_string(), format_rational(bx.radius()));
    parameters.insert("g".to_string(), g.to_string());
    Ok(SdpProblem {
        kind: SdpKind::Nonhomogeneous,
        d,
        parameters,
        variables: layout.variables,
        pushforward: table,
        blocks,
        equalities: stokes_constraints_nonhomog(n, a, b, d)?,
    })
}

/// Relaxation for `{g_1 ≤ 1, g_2 ≤ 1}` with both maps homogeneous.
pub fn build_sdp_multihomog(g1: &Polynomial, g2: &Polynomial, bx: &BoxSpec, d: usize) -> Result<SdpProblem> {
    if d == 0 {
        return Err(Error::InvalidArgument("relaxation order must be at least 1".into()));
    }
    for g in [g1, g2] {
        if g.dimension() != bx.dimension() {
            return Err(Error::DimensionMismatch { expected: bx.dimension(), found: g.dimension() });
        }
    }
    let t1 = g1.homogeneity_degree()?.ok_or(Error::NotHomogeneous)?;
    let t2 = g2.homogeneity_degree()?.ok_or(Error::NotHomogeneous)?;
    let n = u32::try_from(bx.dimension()).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    let table = pushforward_moments_multi(&[g1.clone(), g2.clone()], bx, 2 * d as u32 + 2)?;
    let layout = Layout::new(d);
    let one = Polynomial::one(2);
    let unit1 = &z(0) * &(&one - &z(0));
    let unit2 = &z(1) * &(&one - &z(1));
    let blocks = vec![
        layout.moment_block(d),
        layout.dominance_block(d, &table),
        layout.localizing_block("localizing z1(1-z1)", d, &unit1),
        layout.localizing_block("localizing z2(1-z2)", d, &unit2),
    ];
    let mut parameters = BTreeMap::new();
    parameters.insert("n".to_string(), n.to_string());
    parameters.insert("t1".to_string(), t1.to_string());
    parameters.insert("t2".to_string(), t2.to_string());
    parameters.insert("radius".to_string(), format_rational(bx.radius()));
    parameters.insert("g1".to_string(), g1.to_string());
    parameters.insert("g2".to_string(), g2.to_string());
    Ok(SdpProblem {
        kind: SdpKind::Multihomogeneous,
        d,
        parameters,
        variables: layout.variables,
        pushforward: table,
        blocks,
        equalities: stokes_constraints_multihomog_all(n, t1, t2, 2 * d as u32)?,
    })
}

/// The numeric content of an SDPA sparse file.
///
/// The problem is `minimize cᵀy subject to Σ_i y_i·F_i − F_0 ⪰ 0`; entries
/// are `(matrix, block, i, j, value)` with 1-based indices and `i ≤ j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaData {
    pub m: usize,
    pub block_struct: Vec<i64>,
    pub c: Vec<f64>,
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaData {
    /// Parses the sparse format. Comment lines start with `"` or `*`;
    /// `,`, `(`, `)`, `{`, `}` are treated as whitespace.
    pub fn parse(text: &str) -> Result<SdpaData> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let clean = |l: &str| l.replace([',', '(', ')', '{', '}'], " ");
        let bad = |what: &str| Error::Format(format!("SDPA: {what}"));

        let first = |l: Option<&str>, what: &str| -> Result<String> {
            let l = clean(l.ok_or_else(|| bad(what))?);
            l.split_whitespace().next().map(str::to_string).ok_or_else(|| bad(what))
        };
        let m: usize = first(lines.next(), "missing mDIM")?.parse().map_err(|_| bad("bad mDIM"))?;
        let nblock: usize = first(lines.next(), "missing nBLOCK")?.parse().map_err(|_| bad("bad nBLOCK"))?;
        let block_struct: Vec<i64> = clean(lines.next().ok_or_else(|| bad("missing block structure"))?)
            .split_whitespace()
            .take(nblock)
            .map(|s| s.parse().map_err(|_| bad("bad block size")))
            .collect::<Result<_>>()?;
        if block_struct.len() != nblock {
            return Err(bad("block structure is shorter than nBLOCK"));
        }
        let mut c: Vec<f64> = Vec::with_capacity(m);
        while c.len() < m {
            let l = clean(lines.next().ok_or_else(|| bad("objective vector is too short"))?);
            for tok in l.split_whitespace() {
                c.push(tok.parse().map_err(|_| bad("bad objective entry"))?);
            }
        }
        if c.len() != m {
            return Err(bad("objective vector has the wrong length"));
        }
        let mut entries = Vec::new();
        for l in lines {
            let l = clean(l);
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 5 {
                return Err(bad(&format!("expected 5 fields, got '{l}'")));
            }
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
            let (mat, blk, i, j) = (idx(t[0])?, idx(t[1])?, idx(t[2])?, idx(t[3])?);
            let v: f64 = t[4].parse().map_err(|_| bad("bad value"))?;
            if mat > m || blk == 0 || blk > nblock {
                return Err(bad("entry index out of range"));
            }
            let size = block_struct[blk - 1].unsigned_abs() as usize;
            if i == 0 || j == 0 || i > size || j > size {
                return Err(bad("entry position outside its block"));
            }
            entries.push((mat, blk, i, j, v));
        }
        Ok(SdpaData { m, block_struct, c, entries })
    }
}

impl SdpProblem {
    /// `(name, size)` of every block, the equality block last when present
    /// (its size is negative, as in the SDPA structure line).
    pub fn block_summary(&self) -> Vec<(String, i64)> {
        let mut out: Vec<(String, i64)> = self.blocks.iter().map(|b| (b.name.clone(), b.size as i64)).collect();
        if !self.equalities.is_empty() {
            out.push(("equalities".to_string(), -2 * self.equalities.len() as i64));
        }
        out
    }

    /// Numeric SDPA data. Block `k` contributes `F_0 = −C_k` and
    /// `F_{v+1} = A_{k,v}`; each equality `r` becomes the diagonal pair
    /// `±(Σ c_α φ_α) ≥ 0`.
    pub fn to_sdpa_data(&self) -> SdpaData {
        let m = self.variables.len();
        let mut c = vec![0.0; m];
        c[0] = -1.0;
        let mut entries = Vec::new();
        for (k, block) in self.blocks.iter().enumerate() {
            for i in 0..block.size {
                for j in i..block.size {
                    let e = block.entry(i, j);
                    if !e.constant.is_zero() {
                        entries.push((0, k + 1, i + 1, j + 1, -rational_to_f64(&e.constant)));
                    }
                    for (&v, coef) in &e.terms {
                        entries.push((v + 1, k + 1, i + 1, j + 1, rational_to_f64(coef)));
                    }
                }
            }
        }
        let mut block_struct: Vec<i64> = self.blocks.iter().map(|b| b.size as i64).collect();
        if !self.equalities.is_empty() {
            let rows = self.equalities.len();
            let blk = self.blocks.len() + 1;
            block_struct.push(-2 * rows as i64);
            let index: BTreeMap<&[u32], usize> =
                self.variables.iter().enumerate().map(|(i, a)| (a.as_slice(), i)).collect();
            for (r, eq) in self.equalities.iter().enumerate() {
                for (alpha, coef) in &eq.coefficients {
                    let v = index[alpha.as_slice()] + 1;
                    let x = rational_to_f64(coef);
                    entries.push((v, blk, r + 1, r + 1, x));
                    entries.push((v, blk, rows + r + 1, rows + r + 1, -x));
                }
            }
        }
        entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
        SdpaData { m, block_struct, c, entries }
    }

    /// Writes the SDPA sparse format; returns the number of bytes written.
    pub fn export_sdpa(&self, sink: &mut impl Write) -> Result<usize> {
        let data = self.to_sdpa_data();
        let mut s = String::new();
        let _ = writeln!(s, "\"moment relaxation, {:?}, d = {}: maximize phi_0 (c = -e_1)", self.kind, self.d);
        let _ = writeln!(s, "\"variables y_1..y_m are the moments phi_alpha in graded order");
        let _ = writeln!(s, "{} = mDIM", data.m);
        let _ = writeln!(s, "{} = nBLOCK", data.block_struct.len());
        let _ = writeln!(s, "{}", data.block_struct.iter().map(i64::to_string).collect::<Vec<_>>().join(" "));
        let _ = writeln!(s, "{}", data.c.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" "));
        for (mat, blk, i, j, v) in &data.entries {
            let _ = writeln!(s, "{mat} {blk} {i} {j} {v:.16e}");
        }
        sink.write_all(s.as_bytes())?;
        Ok(s.len())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&SdpJson::from(self)).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<SdpProblem> {
        let j: SdpJson = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        j.into_problem()
    }
}

type JsonTerm = (Vec<u32>, String);

#[derive(Serialize, Deserialize)]
struct SdpJson {
    schema_version: u32,
    kind: SdpKind,
    dim_z: usize,
    d: usize,
    radius: String,
    parameters: BTreeMap<String, String>,
    objective: ObjectiveJson,
    variables: Vec<Vec<u32>>,
    pushforward_moments: Vec<JsonTerm>,
    blocks: Vec<BlockJson>,
    equalities: Vec<EqualityJson>,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveJson {
    maximize: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct BlockJson {
    name: String,
    size: usize,
    /// Upper triangle, row by row.
    entries: Vec<EntryJson>,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    i: usize,
    j: usize,
    constant: String,
    terms: Vec<JsonTerm>,
}

#[derive(Serialize, Deserialize)]
struct EqualityJson {
    label: String,
    terms: Vec<JsonTerm>,
}

fn terms_json<'a>(it: impl Iterator<Item = (&'a Vec<u32>, &'a BigRational)>) -> Vec<JsonTerm> {
    it.map(|(a, c)| (a.clone(), format_rational(c))).collect()
}

impl From<&SdpProblem> for SdpJson {
    fn from(p: &SdpProblem) -> Self {
        let blocks = p
            .blocks
            .iter()
            .map(|b| {
                let mut entries = Vec::new();
                for i in 0..b.size {
                    for j in i..b.size {
                        let e = b.entry(i, j);
                        entries.push(EntryJson {
                            i,
                            j,
                            constant: format_rational(&e.constant),
                            terms: e.terms.iter().map(|(&v, c)| (p.variables[v].clone(), format_rational(c))).collect(),
                        });
                    }
                }
                BlockJson { name: b.name.clone(), size: b.size, entries }
            })
            .collect();
        SdpJson {
            schema_version: 1,
            kind: p.kind,
            dim_z: p.pushforward.arity,
            d: p.d,
            radius: format_rational(p.pushforward.box_spec.radius()),
            parameters: p.parameters.clone(),
            objective: ObjectiveJson { maximize: p.variables[0].clone() },
            variables: p.variables.clone(),
            pushforward_moments: terms_json(p.pushforward.values.iter()),
            blocks,
            equalities: p
                .equalities
                .iter()
                .map(|e| EqualityJson { label: e.label.clone(), terms: terms_json(e.coefficients.iter()) })
                .collect(),
        }
    }
}

impl SdpJson {
    fn into_problem(self) -> Result<SdpProblem> {
        if self.schema_version != 1 {
            return Err(Error::Format(format!("unsupported schema_version {}", self.schema_version)));
        }
        let index: BTreeMap<Vec<u32>, usize> =
            self.variables.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let lookup = |a: &Vec<u32>| {
            index.get(a).copied().ok_or_else(|| Error::Format(format!("unknown multi-index {a:?}")))
        };
        if self.variables.first() != Some(&self.objective.maximize) {
            return Err(Error::Format("the objective must be the first variable".into()));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in self.blocks {
            let mut forms = BTreeMap::new();
            for e in b.entries {
                if e.i > e.j || e.j >= b.size {
                    return Err(Error::Format(format!("entry ({}, {}) outside block '{}'", e.i, e.j, b.name)));
                }
                let mut f = AffineForm { constant: parse_rational(&e.constant)?, ..AffineForm::default() };
                for (a, c) in &e.terms {
                    f.add_term(lookup(a)?, parse_rational(c)?);
                }
                forms.insert((e.i, e.j), f);
            }
            blocks.push(PsdBlock::new(b.name, b.size, |i, j| forms.remove(&(i, j)).unwrap_or_default()));
        }
        let arity = self.dim_z;
        let mut equalities = Vec::with_capacity(self.equalities.len());
        for e in self.equalities {
            let coefficients = e
                .terms
                .iter()
                .map(|(a, c)| Ok((a.clone(), parse_rational(c)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            equalities.push(LinearMomentConstraint { label: e.label, arity, coefficients });
        }
        let values = self
            .pushforward_moments
            .iter()
            .map(|(a, c)| Ok((a.clone(), parse_rational(c)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let order = values.keys().map(|a: &Vec<u32>| a.iter().sum()).max().unwrap_or(0);
        let n: usize = self
            .parameters
            .get("n")
            .ok_or_else(|| Error::Format("missing parameter n".into()))?
            .parse()
            .map_err(|_| Error::Format("bad parameter n".into()))?;
        let box_spec = BoxSpec::new(n, parse_rational(&self.radius)?)?;
        Ok(SdpProblem {
            kind: self.kind,
            d: self.d,
            parameters: self.parameters,
            variables: self.variables,
            pushforward: MultiMomentTable { box_spec, arity, order, values },
            blocks,
            equalities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::is_positive_semidefinite_exact;
    use crate::moments::model_moment;
    use crate::poly::parse_polynomial;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn test_problem(d: usize) -> SdpProblem {
        let g = parse_polynomial("x1 + x1^2 + x2^2", 2).unwrap();
        let bx = BoxSpec::new(2, q(3, 2)).unwrap();
        build_sdp_nonhomog(&g, &bx, &q(-1, 4), &q(1, 2), d).unwrap()
    }

    #[test]
    fn qij_examples() {
        let (a, b) = (q(0, 1), q(1, 1));
        let q00 = stokes_poly_qij(2, &a, &b, 0, 0).unwrap();
        assert_eq!(q00.evaluate_rational(&[q(0, 1), q(0, 1)]).unwrap(), q(0, 1));
        assert_eq!(q00.evaluate_rational(&[q(1, 1), q(0, 1)]).unwrap(), q(-1, 1));
        assert_eq!(stokes_poly_qij(2, &a, &b, 1, 1).unwrap().degree(), 4);
        assert!(stokes_poly_qij(2, &b, &a, 0, 0).is_err());
    }

    #[test]
    fn nonhomog_constraint_count_and_degree() {
        let (a, b) = (q(0, 1), q(1, 1));
        let c1 = stokes_constraints_nonhomog(2, &a, &b, 1).unwrap();
        assert_eq!(c1.len(), 1);
        assert_eq!(c1[0].label, "q[0,0]");
        assert_eq!(c1[0].degree(), 2);
        for d in 1..=4 {
            let cs = stokes_constraints_nonhomog(3, &q(-1, 4), &q(1, 2), d).unwrap();
            assert_eq!(cs.len(), (2 * d - 1) * 2 * d / 2);
            assert!(cs.iter().all(|c| c.degree() as usize <= 2 * d));
        }
    }

    #[test]
    fn multihomog_examples() {
        // (n + t1 + t2)(φ11 + φ22 − φ21 − φ12) − t1(φ21 − φ22) − t2(φ12 − φ22)
        let (n, t1, t2) = (3, 2, 4);
        let c = stokes_constraints_multihomog(n, t1, t2, 1, 1, 1, 1).unwrap();
        let w = i64::from(n + t1 + t2);
        let (t1, t2) = (i64::from(t1), i64::from(t2));
        assert_eq!(c.coefficient(&[1, 1]), int(w));
        assert_eq!(c.coefficient(&[2, 2]), int(w + t1 + t2));
        assert_eq!(c.coefficient(&[2, 1]), int(-w - t1));
        assert_eq!(c.coefficient(&[1, 2]), int(-w - t2));
        assert_eq!(c.coefficients.len(), 4);

        // n(φ00 − φ10 − φ01 + φ11) − t1(φ10 − φ11) − t2(φ01 − φ11)
        let c = stokes_constraints_multihomog(3, 2, 4, 0, 0, 1, 1).unwrap();
        assert_eq!(c.coefficient(&[0, 0]), int(3));
        assert_eq!(c.coefficient(&[1, 0]), int(-3 - 2));
        assert_eq!(c.coefficient(&[0, 1]), int(-3 - 4));
        assert_eq!(c.coefficient(&[1, 1]), int(3 + 2 + 4));
        assert_eq!(c.coefficients.len(), 4);

        assert!(stokes_constraints_multihomog(3, 2, 2, 0, 0, 0, 1).is_err());
    }

    #[test]
    fn single_map_reduction_gives_model_relations() {
        // With the second coordinate identically zero, every relation must be
        // annihilated by the moments n/(n + jt)·φ_0 of the normalized set.
        for (n, t) in [(3u32, 2u32), (2, 4), (5, 6)] {
            let functional = |a: &[u32]| if a[1] == 0 { model_moment(n, t, a[0]) } else { BigRational::zero() };
            for c in stokes_constraints_multihomog_all(n, t, 2, 6).unwrap() {
                assert!(c.apply(functional).is_zero(), "{}", c.label);
            }
        }
    }

    #[test]
    fn scaling_keeps_the_null_space() {
        let c = stokes_constraints_nonhomog(2, &q(0, 1), &q(1, 1), 2).unwrap().remove(2);
        let s = c.scale(&q(-7, 3));
        let f = |a: &[u32]| q(1, 1 + i64::from(a[0]) + 2 * i64::from(a[1]));
        assert_eq!(s.apply(f), c.apply(f) * q(-7, 3));
    }

    #[test]
    fn nonhomog_sdp_shapes() {
        let p = test_problem(1);
        assert_eq!(
            p.block_summary(),
            vec![
                ("moment".to_string(), 3),
                ("dominance".to_string(), 3),
                ("localizing band".to_string(), 1),
                ("equalities".to_string(), -2)
            ]
        );
        assert_eq!(p.variables.len(), 6);
        assert_eq!(p.variables[0], vec![0, 0]);
        assert_eq!(p.pushforward.order, 4);
        let data = p.to_sdpa_data();
        assert_eq!(data.m, 6);
        assert_eq!(data.block_struct, vec![3, 3, 1, -2]);
    }

    #[test]
    fn dominance_constant_is_psd() {
        for d in 1..=3 {
            let p = test_problem(d);
            let dominance = p.blocks.iter().find(|b| b.name == "dominance").unwrap();
            assert!(is_positive_semidefinite_exact(&dominance.constant_matrix()));
        }
    }

    #[test]
    fn sdpa_is_deterministic_and_round_trips() {
        let p = test_problem(2);
        let mut first = Vec::new();
        let bytes = p.export_sdpa(&mut first).unwrap();
        assert_eq!(bytes, first.len());
        let mut second = Vec::new();
        test_problem(2).export_sdpa(&mut second).unwrap();
        assert_eq!(first, second);
        let parsed = SdpaData::parse(std::str::from_utf8(&first).unwrap()).unwrap();
        assert_eq!(parsed, p.to_sdpa_data());
    }

    #[test]
    fn sdpa_without_equalities() {
        let mut p = test_problem(1);
        p.equalities.clear();
        let mut out = Vec::new();
        p.export_sdpa(&mut out).unwrap();
        let parsed = SdpaData::parse(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(parsed.block_struct, vec![3, 3, 1]);
        assert!(parsed.entries.iter().all(|e| e.1 <= 3));
    }

    #[test]
    fn sdpa_parser_rejects_garbage() {
        assert!(SdpaData::parse("").is_err());
        assert!(SdpaData::parse("1\n1\n2\n1.0\n1 1 3 3 1.0\n").is_err());
        assert!(SdpaData::parse("1\n1\n{2}\n(1.0)\n1 1 1 2 1.0\n").is_ok());
    }

    #[test]
    fn json_round_trip_is_lossless() {
        for p in [test_problem(2), {
            let g1 = parse_polynomial("x1^2 + x2^2 + x3^2", 3).unwrap();
            let g2 = parse_polynomial("x1^2 + x2^2 + x3^2 + 2*x1*x2 + 2*x1*x3 + 2*x2*x3", 3).unwrap();
            build_sdp_multihomog(&g1, &g2, &BoxSpec::unit(3), 2).unwrap()
        }] {
            let text = p.to_json().unwrap();
            assert_eq!(SdpProblem::from_json(&text).unwrap(), p);
        }
    }

    #[test]
    fn builder_guards() {
        let bx = BoxSpec::unit(2);
        let homog = parse_polynomial("x1^2 + x2^2", 2).unwrap();
        assert!(matches!(build_sdp_nonhomog(&homog, &bx, &q(0, 1), &q(1, 1), 2), Err(Error::Unsupported(_))));
        let cubic = parse_polynomial("x1 + x1^3", 2).unwrap();
        assert!(matches!(build_sdp_nonhomog(&cubic, &bx, &q(0, 1), &q(1, 1), 2), Err(Error::Unsupported(_))));
        let g = parse_polynomial("x1 + x2^2", 2).unwrap();
        assert!(build_sdp_nonhomog(&g, &bx, &q(1, 1), &q(0, 1), 2).is_err());
        assert_eq!(build_sdp_nonhomog(&parse_polynomial("1 + x1 + x2^2", 2).unwrap(), &bx, &q(0, 1), &q(1, 1), 1).unwrap_err(), Error::NonzeroConstant);
        let mixed = parse_polynomial("x1 + x2^2", 2).unwrap();
        assert_eq!(build_sdp_multihomog(&mixed, &homog, &bx, 1).unwrap_err(), Error::NotHomogeneous);
    }

    #[test]
    fn multihomog_sdp_shapes() {
        let g1 = parse_polynomial("x1^2 + x2^2 + x3^2", 3).unwrap();
        let g2 = parse_polynomial("x1^2 + x2^2 + x3^2 + 2*x1*x2 + 2*x1*x3 + 2*x2*x3", 3).unwrap();
        let p = build_sdp_multihomog(&g1, &g2, &BoxSpec::unit(3), 2).unwrap();
        let sizes: Vec<i64> = p.block_summary().iter().map(|b| b.1).collect();
        // One row per (i, j, k, l) with k, l ≥ 1 and i + j + k + l ≤ 4.
        let rows = multi_indices(4, 4).iter().filter(|v| v[2] >= 1 && v[3] >= 1).count() as i64;
        assert_eq!(sizes, vec![6, 6, 3, 3, -2 * rows]);
    }
}
