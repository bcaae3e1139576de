//! Preconditioned conjugate gradients on the matrix-free Galerkin system.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ProblemSpec, SpectralCoeffs};
use crate::operator::GalerkinOperator;
use crate::precond::{assemble_m_with, PrecondOptions, Truncation};
use crate::sparse::{ilu0, IluFactors};
use crate::transforms::{TransformMode, TransformPlan};

/// Dot product with Neumaier compensated summation.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let t = x * y;
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

fn norm2(v: &[f64]) -> f64 {
    compensated_dot(v, v).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerChoice {
    None,
    Truncated(Truncation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub k_max: usize,
    pub preconditioner: PreconditionerChoice,
    pub record_history: bool,
    #[serde(default)]
    pub precond_options: PrecondOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-12,
            k_max: 10_000,
            preconditioner: PreconditionerChoice::None,
            record_history: true,
            precond_options: PrecondOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn truncated(t1: usize, t2: usize) -> Self {
        Self {
            preconditioner: PreconditionerChoice::Truncated(Truncation::new(t1, t2)),
            ..Self::default()
        }
    }

    pub fn with_truncation(mut self, trunc: Truncation) -> Self {
        self.preconditioner = PreconditionerChoice::Truncated(trunc);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome and diagnostics of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// `||r_k||_2` for `k = 0..=iterations` when recorded.
    pub residual_history: Vec<f64>,
    pub final_relative_residual: f64,
    pub rhs_norm: f64,
    /// Expansion, assembly and factorization.
    pub setup_s: f64,
    pub iter_mean_s: f64,
    pub solve_s: f64,
    pub preconditioner_nnz: Option<usize>,
    pub dim: usize,
    pub n: usize,
    pub transform_mode: TransformMode,
    pub config: SolverConfig,
}

/// Builds the ILU(0) factors of the truncated-coefficient preconditioner.
pub fn build_preconditioner(
    spec: &ProblemSpec,
    trunc: &Truncation,
    options: &PrecondOptions,
    plan: &TransformPlan,
) -> Result<IluFactors> {
    let m = assemble_m_with(spec, trunc, options, Some(plan.rule()))?;
    ilu0(&m)
}

/// The PCG loop with an already built operator and preconditioner.
pub fn pcg_iterate(
    op: &GalerkinOperator<'_>,
    precond: Option<&IluFactors>,
    config: &SolverConfig,
    f: &SpectralCoeffs,
    x0: &SpectralCoeffs,
) -> Result<(SpectralCoeffs, PcgStats)> {
    config.validate()?;
    for v in [f, x0] {
        if v.dim() != op.dim() || v.modes() != op.modes() {
            return Err(Error::ShapeMismatch(format!(
                "vector of shape {}^{} does not match the problem ({}^{})",
                v.modes(),
                v.dim(),
                op.modes(),
                op.dim()
            )));
        }
    }
    if let Some(p) = precond {
        if p.n() != f.len() {
            return Err(Error::LengthMismatch {
                expected: f.len(),
                got: p.n(),
            });
        }
    }
    let n = f.len();
    let fdata = f.data();
    let mut x = x0.data().to_vec();
    let mut w = vec![0.0; n];
    op.apply_slice(&x, &mut w);
    let mut r: Vec<f64> = fdata.iter().zip(&w).map(|(a, b)| a - b).collect();
    let fnorm = norm2(fdata);
    let target = config.epsilon * fnorm;
    let mut rnorm = norm2(&r);
    let mut history = Vec::new();
    if config.record_history {
        history.push(rnorm);
    }
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut rho = 0.0;
    let mut k = 0;
    let start = Instant::now();
    while rnorm > target && k < config.k_max {
        z.copy_from_slice(&r);
        if let Some(ilu) = precond {
            ilu.apply_in_place(&mut z)?;
        }
        k += 1;
        let rho_new = compensated_dot(&r, &z);
        if k == 1 {
            p.copy_from_slice(&z);
        } else {
            let beta = rho_new / rho;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        rho = rho_new;
        op.apply_slice(&p, &mut w);
        let curvature = compensated_dot(&p, &w);
        if !(curvature > 0.0) {
            return Err(Error::Indefinite {
                iteration: k,
                curvature,
            });
        }
        let alpha = rho / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * w[i];
        }
        rnorm = norm2(&r);
        if config.record_history {
            history.push(rnorm);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let stats = PcgStats {
        iterations: k,
        converged: rnorm <= target,
        residual_history: history,
        final_relative_residual: if fnorm > 0.0 { rnorm / fnorm } else { rnorm },
        rhs_norm: fnorm,
        solve_s: elapsed,
    };
    Ok((SpectralCoeffs::from_parts(op.dim(), op.modes(), x), stats))
}

/// Raw iteration statistics of [`pcg_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub final_relative_residual: f64,
    pub rhs_norm: f64,
    pub solve_s: f64,
}

/// Solves `(A + B) x = F` from `x0`.
pub fn pcg_solve(
    spec: &ProblemSpec,
    config: &SolverConfig,
    plan: &TransformPlan,
    f: &SpectralCoeffs,
    x0: &SpectralCoeffs,
) -> Result<(SpectralCoeffs, SolveReport)> {
    config.validate()?;
    let setup_start = Instant::now();
    let op = GalerkinOperator::new(spec, plan)?;
    let ilu = match &config.preconditioner {
        PreconditionerChoice::None => None,
        PreconditionerChoice::Truncated(t) => {
            Some(build_preconditioner(spec, t, &config.precond_options, plan)?)
        }
    };
    let setup_s = setup_start.elapsed().as_secs_f64();
    let (x, stats) = pcg_iterate(&op, ilu.as_ref(), config, f, x0)?;
    let report = SolveReport {
        iterations: stats.iterations,
        converged: stats.converged,
        residual_history: stats.residual_history,
        final_relative_residual: stats.final_relative_residual,
        rhs_norm: stats.rhs_norm,
        setup_s,
        iter_mean_s: if stats.iterations > 0 {
            stats.solve_s / stats.iterations as f64
        } else {
            0.0
        },
        solve_s: stats.solve_s,
        preconditioner_nnz: ilu.as_ref().map(|f| f.nnz()),
        dim: spec.dim(),
        n: spec.n(),
        transform_mode: plan.mode(),
        config: config.clone(),
    };
    Ok((x, report))
}

/// `||F - (A + B) x||_2` recomputed from scratch.
pub fn residual_norm(op: &GalerkinOperator<'_>, f: &SpectralCoeffs, x: &SpectralCoeffs) -> Result<f64> {
    let ax = op.apply_system(x)?;
    let r: Vec<f64> = f.data().iter().zip(ax.data()).map(|(a, b)| a - b).collect();
    Ok(norm2(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CoefficientField;

    #[test]
    fn compensated_dot_recovers_cancellation() {
        let a = [1e16, 1.0, -1e16, 1.0];
        let b = [1.0; 4];
        assert_eq!(compensated_dot(&a, &b), 2.0);
    }

    #[test]
    fn exact_diagonal_preconditioner_converges_in_one_step() {
        let spec = ProblemSpec::isotropic(
            40,
            CoefficientField::constant(1, 1.0).unwrap(),
            CoefficientField::zero(1).unwrap(),
        )
        .unwrap();
        let plan = TransformPlan::for_cutoff(40, TransformMode::Reference).unwrap();
        let f = SpectralCoeffs::filled(1, 39, 1.0);
        let x0 = SpectralCoeffs::zeros(1, 39);
        let (_, rep) = pcg_solve(&spec, &SolverConfig::truncated(0, 0), &plan, &f, &x0).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(rep.residual_history.len(), 2);
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        c.epsilon = 1e-8;
        c.k_max = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kmax_stops_without_error() {
        let spec = ProblemSpec::isotropic(
            30,
            CoefficientField::preset("quartic", 1).unwrap(),
            CoefficientField::zero(1).unwrap(),
        )
        .unwrap();
        let plan = TransformPlan::for_cutoff(30, TransformMode::Reference).unwrap();
        let f = SpectralCoeffs::filled(1, 29, 1.0);
        let cfg = SolverConfig {
            k_max: 2,
            ..SolverConfig::default()
        };
        let (_, rep) = pcg_solve(&spec, &cfg, &plan, &f, &SpectralCoeffs::zeros(1, 29)).unwrap();
        assert_eq!(rep.iterations, 2);
        assert!(!rep.converged);
    }
}
