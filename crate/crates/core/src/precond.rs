//! Sparse preconditioner built from truncated Legendre expansions of the
//! coefficients.
//!
//! With `β ≈ sum_t β̂_t L_t` the preconditioner is a sum of Kronecker
//! products of the 1D blocks
//!
//! * `S^(t)_{im} = (L_t φ'_i, φ'_m) = (2i+3)(2m+3) ∫ L_t L_{i+1} L_{m+1}`
//! * `M^(t)_{im} = (L_t φ_i, φ_m)`, four triple integrals,
//!
//! whose entries vanish outside `|i - m| <= t` (resp. `t + 2`) and whenever
//! `i - m` and `t` differ in parity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CoefficientField, Diffusion, Parity, ProblemSpec};
use crate::legendre::{eval_dphi_all, eval_legendre_all, eval_phi_all, GaussRule, LinearizationTable};
use crate::sparse::{SparseMatrix, PIVOT_TOL};
use crate::transforms::{TransformMode, TransformPlan};

/// Relative level below which expansion coefficients are dropped.
const HAT_DROP: f64 = 1e-15;
/// Minimum oversampled grid size used by [`expand_coefficient`].
const MIN_SAMPLES: usize = 32;

/// Degree-`t` truncation of a coefficient in every direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCoefficient {
    dim: usize,
    cutoff: usize,
    /// `(t+1)^d` coefficients, first axis fastest.
    hat: Vec<f64>,
}

impl TruncatedCoefficient {
    pub fn new(dim: usize, cutoff: usize, hat: Vec<f64>) -> Result<Self> {
        let expected = (cutoff + 1).pow(dim as u32);
        if hat.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: hat.len(),
            });
        }
        Ok(Self { dim, cutoff, hat })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn hat(&self) -> &[f64] {
        &self.hat
    }

    pub fn get(&self, multi: &[usize]) -> f64 {
        let t1 = self.cutoff + 1;
        self.hat[multi.iter().rev().fold(0, |acc, &i| acc * t1 + i)]
    }

    /// Evaluates the truncated series at a point.
    pub fn eval(&self, point: &[f64]) -> f64 {
        let t1 = self.cutoff + 1;
        let tables: Vec<Vec<f64>> = point.iter().map(|&x| eval_legendre_all(self.cutoff, x)).collect();
        let mut sum = 0.0;
        for (idx, &h) in self.hat.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let mut rest = idx;
            let mut prod = h;
            for table in &tables {
                prod *= table[rest % t1];
                rest /= t1;
            }
            sum += prod;
        }
        sum
    }

    /// Largest magnitude coefficient, handy for scale-aware comparisons.
    pub fn max_abs(&self) -> f64 {
        self.hat.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// How the truncated series of a coefficient is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expansion {
    /// Interpolation at the `t + 1` Gauss nodes per axis.
    #[default]
    Interpolation,
    /// First `t + 1` coefficients of an oversampled transform, i.e. the
    /// L2 projection up to rounding.
    Projection,
}

/// How the 1D blocks are integrated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integration {
    /// Gauss quadrature on the operator's `N + 1` point grid, so the
    /// preconditioner carries the same aliasing as the matrix-free operator.
    #[default]
    Collocated,
    /// Exact integrals.
    Exact,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecondOptions {
    #[serde(default)]
    pub expansion: Expansion,
    #[serde(default)]
    pub integration: Integration,
}

/// Legendre coefficients up to degree `t` per axis, by interpolation at the
/// `t + 1` point Gauss grid.
pub fn expand_coefficient(field: &CoefficientField, t: usize) -> Result<TruncatedCoefficient> {
    expand_coefficient_with(field, t, Expansion::Interpolation)
}

pub fn expand_coefficient_with(
    field: &CoefficientField,
    t: usize,
    rule: Expansion,
) -> Result<TruncatedCoefficient> {
    let dim = field.dim();
    let t1 = t + 1;
    if let Some(c) = field.constant_value() {
        let mut hat = vec![0.0; t1.pow(dim as u32)];
        hat[0] = c;
        return TruncatedCoefficient::new(dim, t, hat);
    }
    let q = match rule {
        Expansion::Interpolation => t1,
        Expansion::Projection => (2 * t1).max(MIN_SAMPLES),
    };
    let plan = TransformPlan::new(q, TransformMode::Reference)?;
    let samples = field.sample_tensor(plan.nodes());
    let full = plan.tensor_fdlt(&samples, dim)?;
    let mut hat = Vec::with_capacity(t1.pow(dim as u32));
    for idx in 0..t1.pow(dim as u32) {
        let mut rest = idx;
        let mut flat = 0;
        let mut stride = 1;
        let mut allowed = true;
        for axis in 0..dim {
            let m = rest % t1;
            rest /= t1;
            if let Some(p) = field.parity()[axis] {
                allowed &= p.admits(m);
            }
            flat += m * stride;
            stride *= q;
        }
        hat.push(if allowed { full[flat] } else { 0.0 });
    }
    let scale = hat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for h in hat.iter_mut() {
        if h.abs() <= HAT_DROP * scale {
            *h = 0.0;
        }
    }
    TruncatedCoefficient::new(dim, t, hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// `(L_t φ'_i, φ'_m)`
    Stiffness,
    /// `(L_t φ_i, φ_m)`
    Mass,
}

/// A `K x K` block stored by diagonals `-half..=half`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedBlock {
    kind: BlockKind,
    t: usize,
    k: usize,
    half: usize,
    data: Vec<f64>,
}

impl BandedBlock {
    fn zeros(kind: BlockKind, t: usize, k: usize, half: usize) -> Self {
        Self {
            kind,
            t,
            k,
            half,
            data: vec![0.0; k * (2 * half + 1)],
        }
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.t
    }

    pub fn size(&self) -> usize {
        self.k
    }

    /// Half width of the stored band.
    pub fn half_band(&self) -> usize {
        self.half
    }

    #[inline]
    fn offset_index(&self, i: usize, m: usize) -> Option<usize> {
        let off = m as isize - i as isize;
        if off.unsigned_abs() > self.half || m >= self.k {
            None
        } else {
            Some(i * (2 * self.half + 1) + (off + self.half as isize) as usize)
        }
    }

    pub fn get(&self, i: usize, m: usize) -> f64 {
        self.offset_index(i, m).map_or(0.0, |p| self.data[p])
    }

    fn set(&mut self, i: usize, m: usize, v: f64) {
        let p = self.offset_index(i, m).expect("entry inside band");
        self.data[p] = v;
    }

    /// Entry at `(i, i + off)`, where the caller guarantees the column is
    /// inside the matrix.
    #[inline]
    fn at_offset(&self, i: usize, off: isize) -> f64 {
        self.data[i * (2 * self.half + 1) + (off + self.half as isize) as usize]
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..self.k {
            for m in i.saturating_sub(self.half)..(i + self.half + 1).min(self.k) {
                trip.push((i, m, self.get(i, m)));
            }
        }
        SparseMatrix::from_triplets(self.k, &trip).expect("indices in range")
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k * self.k];
        for i in 0..self.k {
            for m in 0..self.k {
                out[i * self.k + m] = self.get(i, m);
            }
        }
        out
    }
}

/// `S^(t)` and `M^(t)` for `t = 0..=tmax`, all stored with the common half
/// width `tmax + 2`.
#[derive(Debug, Clone)]
pub struct BuildingBlocks {
    k: usize,
    tmax: usize,
    stiffness: Vec<BandedBlock>,
    mass: Vec<BandedBlock>,
}

impl BuildingBlocks {
    pub fn size(&self) -> usize {
        self.k
    }

    pub fn max_degree(&self) -> usize {
        self.tmax
    }

    pub fn half_band(&self) -> usize {
        self.tmax + 2
    }

    pub fn stiffness(&self, t: usize) -> &BandedBlock {
        &self.stiffness[t]
    }

    pub fn mass(&self, t: usize) -> &BandedBlock {
        &self.mass[t]
    }

    pub fn block(&self, kind: BlockKind, t: usize) -> &BandedBlock {
        match kind {
            BlockKind::Stiffness => &self.stiffness[t],
            BlockKind::Mass => &self.mass[t],
        }
    }
}

/// Exact 1D blocks from the closed-form triple product integral.
pub fn building_blocks_1d(tmax: usize, k: usize) -> Result<BuildingBlocks> {
    if k == 0 {
        return Err(Error::EmptyMatrix);
    }
    let half = tmax + 2;
    let table = LinearizationTable::new((tmax + 2 * k + 4) / 2 + 1);
    let ti = |a: usize, b: usize, c: usize| table.triple_integral(a, b, c);
    let mut stiffness = Vec::with_capacity(tmax + 1);
    let mut mass = Vec::with_capacity(tmax + 1);
    for t in 0..=tmax {
        let mut s = BandedBlock::zeros(BlockKind::Stiffness, t, k, half);
        let mut m = BandedBlock::zeros(BlockKind::Mass, t, k, half);
        for i in 0..k {
            let lo = i.saturating_sub(t + 2);
            let hi = (i + t + 3).min(k);
            for j in lo..hi {
                if (i + j + t) % 2 == 1 {
                    continue;
                }
                let sv = (2 * i + 3) as f64 * (2 * j + 3) as f64 * ti(t, i + 1, j + 1);
                s.set(i, j, sv);
                let mv = ti(t, i, j) - ti(t, i, j + 2) - ti(t, i + 2, j) + ti(t, i + 2, j + 2);
                m.set(i, j, mv);
            }
        }
        stiffness.push(s);
        mass.push(m);
    }
    Ok(BuildingBlocks {
        k,
        tmax,
        stiffness,
        mass,
    })
}

/// Same blocks by Gauss quadrature, which is exact once the rule has at
/// least `K + ceil(T/2) + 2` nodes.
pub fn building_blocks_1d_quadrature(tmax: usize, k: usize, rule: &GaussRule) -> Result<BuildingBlocks> {
    if k == 0 {
        return Err(Error::EmptyMatrix);
    }
    let required = k + tmax.div_ceil(2) + 2;
    if rule.order() < required {
        return Err(Error::InsufficientQuadrature {
            required,
            got: rule.order(),
        });
    }
    let half = tmax + 2;
    let mut stiffness: Vec<BandedBlock> = (0..=tmax)
        .map(|t| BandedBlock::zeros(BlockKind::Stiffness, t, k, half))
        .collect();
    let mut mass: Vec<BandedBlock> = (0..=tmax)
        .map(|t| BandedBlock::zeros(BlockKind::Mass, t, k, half))
        .collect();
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let l = eval_legendre_all(tmax, x);
        let phi = eval_phi_all(k, x);
        let dphi = eval_dphi_all(k, x);
        for i in 0..k {
            for j in i.saturating_sub(half)..(i + half + 1).min(k) {
                for t in 0..=tmax {
                    let wl = w * l[t];
                    let p = stiffness[t].offset_index(i, j).unwrap();
                    stiffness[t].data[p] += wl * dphi[i] * dphi[j];
                    mass[t].data[p] += wl * phi[i] * phi[j];
                }
            }
        }
    }
    Ok(BuildingBlocks {
        k,
        tmax,
        stiffness,
        mass,
    })
}

/// Blocks integrated with the Gauss rule `rule`, aliasing included.
///
/// Entries whose integrand degree is within the rule's exactness agree
/// with the closed form, so only the trailing corner where `i + m + t` is
/// close to `2 * order` is recomputed by quadrature. Aliased entries stay
/// inside the band `|i - m| <= t + 2`.
pub fn building_blocks_1d_collocated(tmax: usize, k: usize, rule: &GaussRule) -> Result<BuildingBlocks> {
    let mut blocks = building_blocks_1d(tmax, k)?;
    let q = rule.order();
    let exact_degree = 2 * q - 1;
    // stiffness integrand degree t + i + m + 2, mass t + i + m + 4
    let inexact = |t: usize, i: usize, m: usize| t + i + m + 4 > exact_degree;
    let half = blocks.half_band();
    let lo = (exact_degree + 1).saturating_sub(tmax + 4 + half) / 2;
    if lo >= k {
        return Ok(blocks);
    }
    let width = k - lo;
    let mut acc_s = vec![vec![0.0; width * (2 * half + 1)]; tmax + 1];
    let mut acc_m = acc_s.clone();
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let l = eval_legendre_all(k + 1, x);
        let phi: Vec<f64> = (lo..k).map(|i| l[i] - l[i + 2]).collect();
        let dphi: Vec<f64> = (lo..k).map(|i| -((2 * i + 3) as f64) * l[i + 1]).collect();
        for t in 0..=tmax {
            let wl = w * l[t];
            for a in 0..width {
                let i = lo + a;
                let m_lo = i.saturating_sub(half).max(lo);
                let m_hi = (i + half + 1).min(k);
                let row = a * (2 * half + 1);
                for m in m_lo..m_hi {
                    let b = m - lo;
                    let slot = row + (m + half - i);
                    acc_s[t][slot] += wl * dphi[a] * dphi[b];
                    acc_m[t][slot] += wl * phi[a] * phi[b];
                }
            }
        }
    }
    for t in 0..=tmax {
        for a in 0..width {
            let i = lo + a;
            for m in i.saturating_sub(half).max(lo)..(i + half + 1).min(k) {
                if !inexact(t, i, m) {
                    continue;
                }
                let slot = a * (2 * half + 1) + (m + half - i);
                blocks.stiffness[t].set(i, m, acc_s[t][slot]);
                blocks.mass[t].set(i, m, acc_m[t][slot]);
            }
        }
    }
    Ok(blocks)
}

/// Truncation degrees: one per diffusion field (a single value for an
/// isotropic coefficient, one per axis otherwise) and one for `α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Truncation {
    pub beta: Vec<usize>,
    pub alpha: usize,
}

impl Truncation {
    pub fn new(t1: usize, t2: usize) -> Self {
        Self {
            beta: vec![t1],
            alpha: t2,
        }
    }

    pub fn per_axis(t1: Vec<usize>, t2: usize) -> Self {
        Self { beta: t1, alpha: t2 }
    }

    /// All cutoffs zero: the constant-coefficient baseline.
    pub fn is_zero(&self) -> bool {
        self.alpha == 0 && self.beta.iter().all(|&t| t == 0)
    }

    /// Cutoff used for the diffusion coefficient of `axis`.
    pub fn beta_cutoff(&self, axis: usize) -> usize {
        if self.beta.len() == 1 {
            self.beta[0]
        } else {
            self.beta[axis]
        }
    }

    /// `"4"` or `"4-3-3"`.
    pub fn beta_label(&self) -> String {
        self.beta
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let n = self.beta.len();
        let ok = match spec.diffusion() {
            Diffusion::Isotropic(_) => n == 1,
            Diffusion::PerAxis(v) => n == 1 || n == v.len(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "{n} diffusion cutoffs given for a problem with {} diffusion field(s)",
                spec.diffusion().fields().len()
            )));
        }
        Ok(())
    }
}

/// One Kronecker term `sum_t c_t ⊗_a B^{kind_a}_{t_a}` of the preconditioner.
#[derive(Debug, Clone)]
struct Term {
    coeff: TruncatedCoefficient,
    kinds: Vec<BlockKind>,
}

/// The truncated coefficients behind a preconditioner.
#[derive(Debug, Clone)]
pub struct PreconditionerCoefficients {
    /// Diffusion coefficient per axis (the same for every axis when
    /// isotropic).
    pub beta: Vec<TruncatedCoefficient>,
    pub alpha: Option<TruncatedCoefficient>,
}

impl PreconditionerCoefficients {
    pub fn expand(spec: &ProblemSpec, trunc: &Truncation) -> Result<Self> {
        Self::expand_with(spec, trunc, Expansion::default())
    }

    pub fn expand_with(spec: &ProblemSpec, trunc: &Truncation, rule: Expansion) -> Result<Self> {
        trunc.validate(spec)?;
        let d = spec.dim();
        let beta = match spec.diffusion() {
            Diffusion::Isotropic(f) => {
                let c = expand_coefficient_with(f, trunc.beta_cutoff(0), rule)?;
                vec![c; d]
            }
            Diffusion::PerAxis(v) => v
                .iter()
                .enumerate()
                .map(|(a, f)| expand_coefficient_with(f, trunc.beta_cutoff(a), rule))
                .collect::<Result<Vec<_>>>()?,
        };
        let alpha = if spec.alpha().is_identically_zero() {
            None
        } else {
            Some(expand_coefficient_with(spec.alpha(), trunc.alpha, rule)?)
        };
        Ok(Self { beta, alpha })
    }

    fn terms(&self) -> Vec<Term> {
        let d = self.beta.len();
        let mut out = Vec::with_capacity(d + 1);
        for (axis, c) in self.beta.iter().enumerate() {
            let mut kinds = vec![BlockKind::Mass; d];
            kinds[axis] = BlockKind::Stiffness;
            out.push(Term {
                coeff: c.clone(),
                kinds,
            });
        }
        if let Some(a) = &self.alpha {
            out.push(Term {
                coeff: a.clone(),
                kinds: vec![BlockKind::Mass; d],
            });
        }
        out
    }

    fn max_cutoff(&self) -> usize {
        self.beta
            .iter()
            .chain(self.alpha.iter())
            .map(|c| c.cutoff())
            .max()
            .unwrap_or(0)
    }
}

/// Partial contraction of one term over axes `1..d` for every pair of
/// row/column indices on those axes.
struct Partial {
    t1: usize,
    kind0: BlockKind,
    /// Indexed by `((pos2 * span + off2) * k + i1) * span + off1` (axes
    /// beyond the dimension contribute a single slot), then `t0`.
    data: Vec<f64>,
}

/// Assembles the preconditioner `M` for `spec` with the given truncation.
/// Uses the default options and builds the `N + 1` point rule itself; pass
/// the operator's rule through [`assemble_m_with`] to avoid recomputing it.
pub fn assemble_m(spec: &ProblemSpec, trunc: &Truncation) -> Result<SparseMatrix> {
    assemble_m_with(spec, trunc, &PrecondOptions::default(), None)
}

/// `rule` is the operator's Gauss rule, used when integration is
/// collocated (built on demand when `None`).
pub fn assemble_m_with(
    spec: &ProblemSpec,
    trunc: &Truncation,
    options: &PrecondOptions,
    rule: Option<&GaussRule>,
) -> Result<SparseMatrix> {
    let coeffs = PreconditionerCoefficients::expand_with(spec, trunc, options.expansion)?;
    let k = spec.modes();
    let tmax = coeffs.max_cutoff();
    let blocks = match options.integration {
        Integration::Exact => building_blocks_1d(tmax, k)?,
        Integration::Collocated => match rule {
            Some(r) => {
                if r.order() != spec.grid_order() {
                    return Err(Error::OrderMismatch {
                        plan: r.order(),
                        problem: spec.grid_order(),
                    });
                }
                building_blocks_1d_collocated(tmax, k, r)?
            }
            None => building_blocks_1d_collocated(tmax, k, &GaussRule::new(spec.grid_order())?)?,
        },
    };
    assemble_m_blocks(spec.dim(), &coeffs, &blocks)
}

/// Assembly from already truncated coefficients with exact blocks.
pub fn assemble_m_from(dim: usize, k: usize, coeffs: &PreconditionerCoefficients) -> Result<SparseMatrix> {
    if k == 0 {
        return Err(Error::EmptyMatrix);
    }
    let blocks = building_blocks_1d(coeffs.max_cutoff(), k)?;
    assemble_m_blocks(dim, coeffs, &blocks)
}

/// Assembly from truncated coefficients and prebuilt 1D blocks.
pub fn assemble_m_blocks(
    dim: usize,
    coeffs: &PreconditionerCoefficients,
    blocks: &BuildingBlocks,
) -> Result<SparseMatrix> {
    let k = blocks.size();
    if !(1..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if k == 0 {
        return Err(Error::EmptyMatrix);
    }
    let all = coeffs.beta.iter().chain(coeffs.alpha.iter());
    if coeffs.beta.len() != dim || all.clone().any(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: coeffs.beta.len(),
        });
    }
    if coeffs.max_cutoff() > blocks.max_degree() {
        return Err(Error::InvalidArgument(format!(
            "blocks built up to degree {}, coefficients need {}",
            blocks.max_degree(),
            coeffs.max_cutoff()
        )));
    }
    let half = blocks.half_band() as isize;
    let span = 2 * blocks.half_band() + 1;
    let terms = coeffs.terms();
    let parts: Vec<Partial> = terms
        .iter()
        .map(|term| partial_contraction(term, blocks, dim, k, span))
        .collect();

    let n = k.pow(dim as u32);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    let ki = k as isize;
    let (k1, k2) = (if dim > 1 { k } else { 1 }, if dim > 2 { k } else { 1 });
    let (s1, s2) = (if dim > 1 { span } else { 1 }, if dim > 2 { span } else { 1 });
    let range = |i: usize, present: bool| -> std::ops::RangeInclusive<isize> {
        if present {
            (-(i as isize)).max(-half)..=(ki - 1 - i as isize).min(half)
        } else {
            0..=0
        }
    };
    for i2 in 0..k2 {
        for i1 in 0..k1 {
            for i0 in 0..k {
                for off2 in range(i2, dim > 2) {
                    for off1 in range(i1, dim > 1) {
                        let o2 = if dim > 2 { (off2 + half) as usize } else { 0 };
                        let o1 = if dim > 1 { (off1 + half) as usize } else { 0 };
                        let slot = ((i2 * s2 + o2) * k1 + i1) * s1 + o1;
                        let m2 = (i2 as isize + off2) as usize;
                        let m1 = (i1 as isize + off1) as usize;
                        for off0 in range(i0, true) {
                            let mut v = 0.0;
                            for part in &parts {
                                let w = &part.data[slot * part.t1..(slot + 1) * part.t1];
                                for (t0, &wt) in w.iter().enumerate() {
                                    if wt != 0.0 {
                                        v += wt * blocks.block(part.kind0, t0).at_offset(i0, off0);
                                    }
                                }
                            }
                            if v.abs() > PIVOT_TOL {
                                let m0 = (i0 as isize + off0) as usize;
                                col_idx.push(m0 + k * (m1 + k * m2));
                                values.push(v);
                            }
                        }
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
    }
    let m = SparseMatrix::from_csr_unchecked(n, row_ptr, col_idx, values);
    Ok(symmetrize(m))
}

fn partial_contraction(term: &Term, blocks: &BuildingBlocks, dim: usize, k: usize, span: usize) -> Partial {
    let c = &term.coeff;
    let t1 = c.cutoff() + 1;
    let half = blocks.half_band() as isize;
    let (k1, k2) = (if dim > 1 { k } else { 1 }, if dim > 2 { k } else { 1 });
    let (s1, s2) = (if dim > 1 { span } else { 1 }, if dim > 2 { span } else { 1 });
    let lookup = |axis: usize, t: usize, i: usize, off_slot: usize, present: bool| -> f64 {
        if !present {
            return if t == 0 { 1.0 } else { 0.0 };
        }
        let off = off_slot as isize - half;
        let m = i as isize + off;
        if m < 0 || m >= k as isize {
            0.0
        } else {
            blocks.block(term.kinds[axis], t).at_offset(i, off)
        }
    };
    let t_axis1 = if dim > 1 { t1 } else { 1 };
    let t_axis2 = if dim > 2 { t1 } else { 1 };
    // contract axis 2 first: w2[(i2, o2)][t0, t1]
    let mut w2 = vec![0.0; k2 * s2 * t1 * t_axis1];
    for i2 in 0..k2 {
        for o2 in 0..s2 {
            let base = (i2 * s2 + o2) * t1 * t_axis1;
            for ta in 0..t_axis2 {
                let b = lookup(2, ta, i2, if dim > 2 { o2 } else { 0 }, dim > 2);
                if b == 0.0 {
                    continue;
                }
                for tb in 0..t_axis1 {
                    for t0 in 0..t1 {
                        let h = c.hat()[t0 + t1 * (tb + t1 * ta)];
                        w2[base + tb * t1 + t0] += h * b;
                    }
                }
            }
        }
    }
    // then axis 1: data[((i2, o2), i1, o1)][t0]
    let slots = k2 * s2 * k1 * s1;
    let mut data = vec![0.0; slots * t1];
    for i2o2 in 0..k2 * s2 {
        for i1 in 0..k1 {
            for o1 in 0..s1 {
                let slot = (i2o2 * k1 + i1) * s1 + o1;
                for tb in 0..t_axis1 {
                    let b = lookup(1, tb, i1, o1, dim > 1);
                    if b == 0.0 {
                        continue;
                    }
                    let src = &w2[(i2o2 * t_axis1 + tb) * t1..(i2o2 * t_axis1 + tb + 1) * t1];
                    for (d, s) in data[slot * t1..(slot + 1) * t1].iter_mut().zip(src) {
                        *d += s * b;
                    }
                }
            }
        }
    }
    Partial {
        t1,
        kind0: term.kinds[0],
        data,
    }
}

/// Replaces the matrix by `(M + M^T)/2` when round-off made it slightly
/// asymmetric. The pattern is symmetric by construction.
fn symmetrize(m: SparseMatrix) -> SparseMatrix {
    let t = m.transpose();
    if t.col_idx() != m.col_idx() {
        // patterns differ only if a value cancelled to below the drop level
        // on one side; fall back to a triplet merge
        let mut trip = Vec::with_capacity(2 * m.nnz());
        for i in 0..m.n() {
            let (c, v) = m.row(i);
            trip.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, 0.5 * x)));
            let (c, v) = t.row(i);
            trip.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, 0.5 * x)));
        }
        return SparseMatrix::from_triplets(m.n(), &trip).expect("indices in range");
    }
    let values: Vec<f64> = m
        .values()
        .iter()
        .zip(t.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    SparseMatrix::from_csr_unchecked(m.n(), m.row_ptr().to_vec(), m.col_idx().to_vec(), values)
}

/// Which part of the 1D preconditioner a bandwidth refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandPart {
    Diffusion,
    Reaction,
}

/// Total number of diagonals that may be nonzero in the 1D diffusion part
/// (`q1`) or reaction part (`q2`) for a coefficient truncated at degree `t`.
/// Unknown parity gives the conservative `2t + 5`.
pub fn predicted_bandwidth(t: usize, parity: Option<Parity>, which: BandPart) -> usize {
    let Some(p) = parity else {
        return 2 * t + 5;
    };
    // highest degree up to t that the coefficient can contain
    let effective = if p.admits(t) { Some(t) } else { t.checked_sub(1) };
    match (which, effective) {
        (BandPart::Diffusion, Some(te)) => 2 * te + 1,
        (BandPart::Reaction, Some(te)) => 2 * te + 5,
        // odd coefficient cut at t = 0 vanishes
        (_, None) => 0,
    }
}

/// Realized total bandwidth `2 max|i - j| + 1` of a matrix (0 when empty).
pub fn realized_bandwidth(m: &SparseMatrix) -> usize {
    let mut worst: Option<usize> = None;
    for i in 0..m.n() {
        for &j in m.row(i).0 {
            let d = i.abs_diff(j);
            worst = Some(worst.map_or(d, |w: usize| w.max(d)));
        }
    }
    worst.map_or(0, |w| 2 * w + 1)
}
