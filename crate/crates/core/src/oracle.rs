//! Slow dense reference computations used to validate the fast paths.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CoefficientField, Diffusion, ProblemSpec};
use crate::legendre::{eval_dphi_all, eval_phi_all, GaussRule};
use crate::precond::{BlockKind, Integration, PrecondOptions, PreconditionerCoefficients, Truncation};
use crate::tensor::map_axis;
use crate::transforms::TransformPlan;

/// Largest number of rows [`dense_assemble`] accepts.
pub const DENSE_ROW_LIMIT: usize = 4096;

/// Dense stiffness (`A`) and mass-type (`B`) matrices of one problem.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl DenseSystem {
    pub fn total(&self) -> DMatrix<f64> {
        &self.a + &self.b
    }
}

/// One weighted bilinear form `sum_grid w g prod_a B_a(j_a) B_a(k_a)`.
struct FormTerm {
    grid: Vec<f64>,
    kinds: Vec<BlockKind>,
}

fn basis_table(kind: BlockKind, k: usize, nodes: &[f64]) -> DMatrix<f64> {
    let q = nodes.len();
    let mut b = DMatrix::zeros(q, k);
    for (i, &x) in nodes.iter().enumerate() {
        let row = match kind {
            BlockKind::Stiffness => eval_dphi_all(k, x),
            BlockKind::Mass => eval_phi_all(k, x),
        };
        for (j, v) in row.into_iter().enumerate() {
            b[(i, j)] = v;
        }
    }
    b
}

fn assemble_form(dim: usize, k: usize, rule: &GaussRule, terms: &[FormTerm]) -> DMatrix<f64> {
    let q = rule.order();
    let w = rule.weights();
    let tables = [
        basis_table(BlockKind::Stiffness, k, rule.nodes()),
        basis_table(BlockKind::Mass, k, rule.nodes()),
    ];
    let n = k.pow(dim as u32);
    let mut out = DMatrix::zeros(n, n);
    for term in terms {
        let mut cur = term.grid.clone();
        let mut ext = vec![q; dim];
        for axis in 0..dim {
            let b = match term.kinds[axis] {
                BlockKind::Stiffness => &tables[0],
                BlockKind::Mass => &tables[1],
            };
            cur = map_axis(&cur, &ext, axis, k * k, |line, res| {
                let mut bw = b.clone();
                for (i, mut row) in bw.row_iter_mut().enumerate() {
                    row *= w[i] * line[i];
                }
                let g = b.tr_mul(&bw);
                // res[j * k + m], j the test index
                for j in 0..k {
                    for m in 0..k {
                        res[j * k + m] = g[(j, m)];
                    }
                }
            });
            ext[axis] = k * k;
        }
        for (idx, &v) in cur.iter().enumerate() {
            let mut rest = idx;
            let (mut row, mut col, mut stride) = (0, 0, 1);
            for _ in 0..dim {
                let pair = rest % (k * k);
                rest /= k * k;
                row += (pair / k) * stride;
                col += (pair % k) * stride;
                stride *= k;
            }
            out[(row, col)] += v;
        }
    }
    out
}

fn check_rows(spec: &ProblemSpec) -> Result<()> {
    let rows = spec.unknowns();
    if rows > DENSE_ROW_LIMIT {
        return Err(Error::SizeGuard {
            rows,
            limit: DENSE_ROW_LIMIT,
        });
    }
    Ok(())
}

fn stiffness_kinds(dim: usize, axis: usize) -> Vec<BlockKind> {
    let mut kinds = vec![BlockKind::Mass; dim];
    kinds[axis] = BlockKind::Stiffness;
    kinds
}

/// Dense `A` and `B` by Gauss quadrature.
///
/// Without truncation the coefficients are sampled on the plan's `N + 1`
/// point grid, which reproduces the interpolated bilinear forms of the
/// matrix-free operator exactly. With truncation the coefficients are
/// replaced by their truncated series, giving the dense counterpart of the
/// preconditioner under the default [`PrecondOptions`].
pub fn dense_assemble_parts(
    spec: &ProblemSpec,
    plan: &TransformPlan,
    truncation: Option<&Truncation>,
) -> Result<DenseSystem> {
    match truncation {
        None => dense_parts_impl(spec, plan, None),
        Some(t) => dense_parts_impl(spec, plan, Some((t, &PrecondOptions::default()))),
    }
}

/// Dense preconditioner for explicit options. Collocated integration uses
/// the plan's rule, exact integration a rule fine enough to be exact.
pub fn dense_preconditioner(
    spec: &ProblemSpec,
    plan: &TransformPlan,
    truncation: &Truncation,
    options: &PrecondOptions,
) -> Result<DMatrix<f64>> {
    Ok(dense_parts_impl(spec, plan, Some((truncation, options)))?.total())
}

fn dense_parts_impl(
    spec: &ProblemSpec,
    plan: &TransformPlan,
    truncation: Option<(&Truncation, &PrecondOptions)>,
) -> Result<DenseSystem> {
    check_rows(spec)?;
    if plan.order() != spec.grid_order() {
        return Err(Error::OrderMismatch {
            plan: plan.order(),
            problem: spec.grid_order(),
        });
    }
    let (d, k) = (spec.dim(), spec.modes());
    let mut a_terms = Vec::with_capacity(d);
    let mut b_terms = Vec::new();
    let rule;
    match truncation {
        None => {
            rule = plan.rule().clone();
            for axis in 0..d {
                let field = spec.diffusion().axis(axis);
                a_terms.push(FormTerm {
                    grid: field.sample_tensor(rule.nodes()),
                    kinds: stiffness_kinds(d, axis),
                });
            }
            if !spec.alpha().is_identically_zero() {
                b_terms.push(FormTerm {
                    grid: spec.alpha().sample_tensor(rule.nodes()),
                    kinds: vec![BlockKind::Mass; d],
                });
            }
        }
        Some((trunc, options)) => {
            let coeffs = PreconditionerCoefficients::expand_with(spec, trunc, options.expansion)?;
            let tmax = coeffs
                .beta
                .iter()
                .chain(coeffs.alpha.iter())
                .map(|c| c.cutoff())
                .max()
                .unwrap_or(0);
            rule = match options.integration {
                Integration::Collocated => plan.rule().clone(),
                Integration::Exact => GaussRule::new(k + tmax.div_ceil(2) + 2)?,
            };
            let sample = |c: &crate::precond::TruncatedCoefficient| {
                let f = CoefficientField::custom(d, "truncated", {
                    let c = c.clone();
                    move |p| c.eval(p)
                })
                .expect("valid dimension");
                f.sample_tensor(rule.nodes())
            };
            for (axis, c) in coeffs.beta.iter().enumerate() {
                a_terms.push(FormTerm {
                    grid: sample(c),
                    kinds: stiffness_kinds(d, axis),
                });
            }
            if let Some(c) = &coeffs.alpha {
                b_terms.push(FormTerm {
                    grid: sample(c),
                    kinds: vec![BlockKind::Mass; d],
                });
            }
        }
    }
    Ok(DenseSystem {
        a: assemble_form(d, k, &rule, &a_terms),
        b: assemble_form(d, k, &rule, &b_terms),
    })
}

/// Dense `A + B`, see [`dense_assemble_parts`].
pub fn dense_assemble(
    spec: &ProblemSpec,
    plan: &TransformPlan,
    truncation: Option<&Truncation>,
) -> Result<DMatrix<f64>> {
    Ok(dense_assemble_parts(spec, plan, truncation)?.total())
}

/// Partial-pivoting LU solve.
pub fn dense_solve(matrix: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    if !matrix.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix is not square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if rhs.len() != matrix.nrows() {
        return Err(Error::LengthMismatch {
            expected: matrix.nrows(),
            got: rhs.len(),
        });
    }
    if matrix.nrows() == 0 {
        return Ok(Vec::new());
    }
    let lu = matrix.clone().lu();
    let u = lu.u();
    let scale = u.diagonal().amax();
    for i in 0..u.nrows() {
        if u[(i, i)].abs() <= f64::EPSILON * scale * u.nrows() as f64 || scale == 0.0 {
            return Err(Error::Singular(i));
        }
    }
    let x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(Error::Singular(0))?;
    Ok(x.iter().copied().collect())
}

/// Number of singular values `σ_i >= τ σ_1`.
pub fn numerical_rank(block: &DMatrix<f64>, tau: f64) -> Result<usize> {
    numerical_rank_with(block, tau, RankConvention::Relative)
}

/// How a tolerance is compared against singular values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankConvention {
    /// `σ_i >= τ σ_1`.
    Relative,
    /// `σ_i >= τ`. Reproduces the reference mass-matrix rank tables.
    #[default]
    Absolute,
}

impl std::str::FromStr for RankConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relative" => Ok(RankConvention::Relative),
            "absolute" => Ok(RankConvention::Absolute),
            _ => Err(Error::InvalidArgument(format!(
                "rank convention '{s}' must be relative or absolute"
            ))),
        }
    }
}

fn count_rank(sv: &[f64], tau: f64, convention: RankConvention) -> Result<usize> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("tau = {tau} must be positive")));
    }
    let s1 = sv.iter().cloned().fold(0.0, f64::max);
    if s1 == 0.0 {
        return Ok(0);
    }
    let cut = match convention {
        RankConvention::Relative => tau * s1,
        RankConvention::Absolute => tau,
    };
    Ok(sv.iter().filter(|&&s| s >= cut).count())
}

fn singular_values(block: &DMatrix<f64>) -> Vec<f64> {
    if block.is_empty() {
        Vec::new()
    } else {
        block.singular_values().iter().cloned().collect()
    }
}

/// Numerical rank under an explicit tolerance convention.
pub fn numerical_rank_with(block: &DMatrix<f64>, tau: f64, convention: RankConvention) -> Result<usize> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("tau = {tau} must be positive")));
    }
    count_rank(&singular_values(block), tau, convention)
}

/// Which matrix of a 1D problem the rank study inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankTarget {
    /// Stiffness matrix with the field as `β`.
    A,
    /// Mass-type matrix with the field as `α`.
    B,
}

impl std::str::FromStr for RankTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(RankTarget::A),
            "B" | "b" => Ok(RankTarget::B),
            _ => Err(Error::InvalidArgument(format!("rank target '{s}' must be A or B"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub n: usize,
    pub tau: f64,
    pub rank: usize,
}

/// Upper-right block of a matrix indexed by modes `0..N-1`: rows `0..N/2`
/// against columns `N/2..`.
pub fn offdiag_block(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let h = (n / 2).min(m.nrows()).min(m.ncols());
    m.view((0, h), (h, m.ncols() - h)).into_owned()
}

/// Off-diagonal numerical ranks of the 1D matrix built from `field`.
pub fn offdiag_rank_experiment(
    field: &CoefficientField,
    which: RankTarget,
    n_list: &[usize],
    tau_list: &[f64],
) -> Result<Vec<RankRow>> {
    offdiag_rank_experiment_with(field, which, n_list, tau_list, RankConvention::default())
}

/// [`offdiag_rank_experiment`] with an explicit tolerance convention.
pub fn offdiag_rank_experiment_with(
    field: &CoefficientField,
    which: RankTarget,
    n_list: &[usize],
    tau_list: &[f64],
    convention: RankConvention,
) -> Result<Vec<RankRow>> {
    if field.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: field.dim(),
        });
    }
    for &tau in tau_list {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::InvalidArgument(format!("tau = {tau} must be positive")));
        }
    }
    let mut rows = Vec::with_capacity(n_list.len() * tau_list.len());
    for &n in n_list {
        if n % 2 == 1 {
            return Err(Error::InvalidArgument(format!("N = {n} must be even")));
        }
        let one = CoefficientField::constant(1, 1.0)?;
        let (beta, alpha) = match which {
            RankTarget::A => (field.clone(), CoefficientField::zero(1)?),
            RankTarget::B => (one.clone(), field.clone()),
        };
        let spec = ProblemSpec::new(n, Diffusion::Isotropic(beta), alpha, one)?;
        let plan = TransformPlan::for_cutoff(n, crate::transforms::TransformMode::Reference)?;
        let parts = dense_assemble_parts(&spec, &plan, None)?;
        let matrix = match which {
            RankTarget::A => parts.a,
            RankTarget::B => parts.b,
        };
        let sv = singular_values(&offdiag_block(&matrix, n));
        for &tau in tau_list {
            rows.push(RankRow {
                n,
                tau,
                rank: count_rank(&sv, tau, convention)?,
            });
        }
    }
    Ok(rows)
}
