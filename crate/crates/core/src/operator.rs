//! Matrix-free Galerkin operator `(A + B) u`.
//!
//! Every application converts φ coefficients to Legendre coefficients,
//! transforms to the Gauss grid, multiplies by the sampled coefficient,
//! transforms back and pairs the result with the test functions. Pairing
//! with `φ_j` or `φ'_j` factorizes over axes, so the 2D and 3D contraction
//! formulas reduce to one 1D map per axis.

use crate::error::{Error, Result};
use crate::field::{CoefficientField, ProblemSpec, SpectralCoeffs};
use crate::legendre::{
    dphi_to_legendre_into, pair_with_dphi_into, pair_with_phi_into, phi_to_legendre_into,
};
use crate::tensor::map_axis;
use crate::transforms::TransformPlan;

type AxisMap = fn(&[f64], &mut [f64]);

/// Bilinear-form evaluator bound to one problem and one transform plan.
/// Coefficient samples on the Gauss grid are computed once.
#[derive(Debug)]
pub struct GalerkinOperator<'p> {
    spec: ProblemSpec,
    plan: &'p TransformPlan,
    /// One grid per axis for per-axis diffusion, a single grid otherwise.
    beta_grid: Vec<Vec<f64>>,
    alpha_grid: Option<Vec<f64>>,
}

fn check_plan(spec: &ProblemSpec, plan: &TransformPlan) -> Result<()> {
    if plan.order() != spec.grid_order() {
        return Err(Error::OrderMismatch {
            plan: plan.order(),
            problem: spec.grid_order(),
        });
    }
    Ok(())
}

fn diffusion_grid(field: &CoefficientField, nodes: &[f64]) -> Result<Vec<f64>> {
    let grid = field.sample_tensor(nodes);
    let min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && min.is_finite()) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonPositiveCoefficient {
            name: field.name().to_string(),
            value: min,
        });
    }
    Ok(grid)
}

impl<'p> GalerkinOperator<'p> {
    pub fn new(spec: &ProblemSpec, plan: &'p TransformPlan) -> Result<Self> {
        check_plan(spec, plan)?;
        let nodes = plan.nodes();
        let beta_grid = spec
            .diffusion()
            .fields()
            .into_iter()
            .map(|f| diffusion_grid(f, nodes))
            .collect::<Result<Vec<_>>>()?;
        let alpha_grid = if spec.alpha().is_identically_zero() {
            None
        } else {
            Some(spec.alpha().sample_tensor(nodes))
        };
        Ok(Self {
            spec: spec.clone(),
            plan,
            beta_grid,
            alpha_grid,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn plan(&self) -> &TransformPlan {
        self.plan
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn modes(&self) -> usize {
        self.spec.modes()
    }

    pub fn has_reaction(&self) -> bool {
        self.alpha_grid.is_some()
    }

    fn check_input(&self, u: &SpectralCoeffs) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        if u.modes() != self.modes() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient tensor has {} modes per axis, problem has {}",
                u.modes(),
                self.modes()
            )));
        }
        Ok(())
    }

    /// Maps the `K^d` input to the `P^d` Legendre tensor, using `maps[a]`
    /// on axis `a`.
    fn lift(&self, u: &[f64], maps: &[AxisMap]) -> Vec<f64> {
        let (k, p) = (self.modes(), self.plan.order());
        let mut ext = vec![k; self.dim()];
        let mut cur = u.to_vec();
        for (axis, map) in maps.iter().enumerate() {
            cur = map_axis(&cur, &ext, axis, p, map);
            ext[axis] = p;
        }
        cur
    }

    /// Inverse shape change `P^d -> K^d` with the pairing maps.
    fn contract(&self, v: &[f64], maps: &[AxisMap], out: &mut [f64]) {
        let (k, p) = (self.modes(), self.plan.order());
        let mut ext = vec![p; self.dim()];
        let mut cur = v.to_vec();
        for (axis, map) in maps.iter().enumerate() {
            cur = map_axis(&cur, &ext, axis, k, map);
            ext[axis] = k;
        }
        for (o, c) in out.iter_mut().zip(cur) {
            *o += c;
        }
    }

    /// `lift -> bdlt -> multiply by grid -> fdlt -> contract`, accumulated.
    fn weighted_pass(
        &self,
        u: &[f64],
        grid: &[f64],
        lift: &[AxisMap],
        pair: &[AxisMap],
        out: &mut [f64],
    ) {
        let d = self.dim();
        let mut v = self.lift(u, lift);
        self.plan.tensor_in_place(&mut v, d, false);
        for (x, g) in v.iter_mut().zip(grid) {
            *x *= g;
        }
        self.plan.tensor_in_place(&mut v, d, true);
        self.contract(&v, pair, out);
    }

    fn axis_maps(&self, gradient_axis: Option<usize>) -> (Vec<AxisMap>, Vec<AxisMap>) {
        let d = self.dim();
        let mut lift: Vec<AxisMap> = vec![phi_to_legendre_into; d];
        let mut pair: Vec<AxisMap> = vec![pair_with_phi_into; d];
        if let Some(a) = gradient_axis {
            lift[a] = dphi_to_legendre_into;
            pair[a] = pair_with_dphi_into;
        }
        (lift, pair)
    }

    fn accumulate_a(&self, u: &[f64], out: &mut [f64]) {
        for axis in 0..self.dim() {
            let grid = if self.beta_grid.len() == 1 {
                &self.beta_grid[0]
            } else {
                &self.beta_grid[axis]
            };
            let (lift, pair) = self.axis_maps(Some(axis));
            self.weighted_pass(u, grid, &lift, &pair, out);
        }
    }

    fn accumulate_b(&self, u: &[f64], out: &mut [f64]) {
        if let Some(grid) = &self.alpha_grid {
            let (lift, pair) = self.axis_maps(None);
            self.weighted_pass(u, grid, &lift, &pair, out);
        }
    }

    /// Diffusion part `A u`.
    pub fn apply_a(&self, u: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.check_input(u)?;
        let mut out = vec![0.0; u.len()];
        self.accumulate_a(u.data(), &mut out);
        Ok(SpectralCoeffs::from_parts(self.dim(), self.modes(), out))
    }

    /// Reaction part `B u`, zero when `α ≡ 0`.
    pub fn apply_b(&self, u: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.check_input(u)?;
        let mut out = vec![0.0; u.len()];
        self.accumulate_b(u.data(), &mut out);
        Ok(SpectralCoeffs::from_parts(self.dim(), self.modes(), out))
    }

    /// `(A + B) u`.
    pub fn apply_system(&self, u: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.check_input(u)?;
        let mut out = vec![0.0; u.len()];
        self.apply_slice(u.data(), &mut out);
        Ok(SpectralCoeffs::from_parts(self.dim(), self.modes(), out))
    }

    /// `out = (A + B) u` on raw buffers of length `K^d`.
    pub(crate) fn apply_slice(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.accumulate_a(u, out);
        self.accumulate_b(u, out);
    }

    /// Load vector `F_k = (I_N f, φ_k)`.
    pub fn assemble_rhs(&self) -> SpectralCoeffs {
        let d = self.dim();
        let mut v = self.spec.rhs().sample_tensor(self.plan.nodes());
        self.plan.tensor_in_place(&mut v, d, true);
        let (_, pair) = self.axis_maps(None);
        let mut out = vec![0.0; self.spec.unknowns()];
        self.contract(&v, &pair, &mut out);
        SpectralCoeffs::from_parts(d, self.modes(), out)
    }
}

pub fn apply_a(spec: &ProblemSpec, plan: &TransformPlan, u: &SpectralCoeffs) -> Result<SpectralCoeffs> {
    GalerkinOperator::new(spec, plan)?.apply_a(u)
}

pub fn apply_b(spec: &ProblemSpec, plan: &TransformPlan, u: &SpectralCoeffs) -> Result<SpectralCoeffs> {
    GalerkinOperator::new(spec, plan)?.apply_b(u)
}

pub fn apply_system(
    spec: &ProblemSpec,
    plan: &TransformPlan,
    u: &SpectralCoeffs,
) -> Result<SpectralCoeffs> {
    GalerkinOperator::new(spec, plan)?.apply_system(u)
}

pub fn assemble_rhs(spec: &ProblemSpec, plan: &TransformPlan) -> Result<SpectralCoeffs> {
    Ok(GalerkinOperator::new(spec, plan)?.assemble_rhs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Diffusion;
    use crate::transforms::TransformMode;

    fn problem_1d(n: usize, beta: f64, alpha: f64) -> ProblemSpec {
        ProblemSpec::isotropic(
            n,
            CoefficientField::constant(1, beta).unwrap(),
            CoefficientField::constant(1, alpha).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn laplacian_is_diagonal() {
        let spec = problem_1d(10, 1.0, 0.0);
        let plan = TransformPlan::for_cutoff(10, TransformMode::Reference).unwrap();
        let op = GalerkinOperator::new(&spec, &plan).unwrap();
        for k in 0..9 {
            let mut e = vec![0.0; 9];
            e[k] = 1.0;
            let out = op.apply_a(&SpectralCoeffs::new(1, 9, e).unwrap()).unwrap();
            for (j, v) in out.data().iter().enumerate() {
                let want = if j == k { 4.0 * k as f64 + 6.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "k={k} j={j} v={v}");
            }
        }
    }

    #[test]
    fn mass_matrix_columns() {
        let spec = problem_1d(12, 1.0, 1.0);
        let plan = TransformPlan::for_cutoff(12, TransformMode::Reference).unwrap();
        let op = GalerkinOperator::new(&spec, &plan).unwrap();
        let k = 4;
        let mut e = vec![0.0; 11];
        e[k] = 1.0;
        let out = op.apply_b(&SpectralCoeffs::new(1, 11, e).unwrap()).unwrap();
        let kf = k as f64;
        let d = out.data();
        assert!((d[k] - (2.0 / (2.0 * kf + 1.0) + 2.0 / (2.0 * kf + 5.0))).abs() < 1e-13);
        assert!((d[k + 2] + 2.0 / (2.0 * kf + 5.0)).abs() < 1e-13);
        assert!((d[k - 2] + 2.0 / (2.0 * kf + 1.0)).abs() < 1e-13);
        assert!(d[k + 1].abs() < 1e-13 && d[k - 1].abs() < 1e-13);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let spec = problem_1d(8, 1.0, 0.0);
        let plan = TransformPlan::for_cutoff(9, TransformMode::Reference).unwrap();
        assert!(matches!(
            GalerkinOperator::new(&spec, &plan),
            Err(Error::OrderMismatch { .. })
        ));
        let plan = TransformPlan::for_cutoff(8, TransformMode::Reference).unwrap();
        let op = GalerkinOperator::new(&spec, &plan).unwrap();
        assert!(op.apply_a(&SpectralCoeffs::zeros(1, 6)).is_err());
        assert!(op.apply_a(&SpectralCoeffs::zeros(2, 7)).is_err());
        let neg = problem_1d(8, -1.0, 0.0);
        assert!(matches!(
            GalerkinOperator::new(&neg, &plan),
            Err(Error::NonPositiveCoefficient { .. })
        ));
    }

    #[test]
    fn per_axis_diffusion_matches_isotropic_for_equal_fields() {
        let n = 7;
        let beta = CoefficientField::preset("quartic", 2).unwrap();
        let alpha = CoefficientField::zero(2).unwrap();
        let rhs = CoefficientField::constant(2, 1.0).unwrap();
        let iso = ProblemSpec::new(n, Diffusion::Isotropic(beta.clone()), alpha.clone(), rhs.clone()).unwrap();
        let per = ProblemSpec::new(n, Diffusion::PerAxis(vec![beta.clone(), beta]), alpha, rhs).unwrap();
        let plan = TransformPlan::for_cutoff(n, TransformMode::Reference).unwrap();
        let u = SpectralCoeffs::new(2, 6, (0..36).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = apply_a(&iso, &plan, &u).unwrap();
        let b = apply_a(&per, &plan, &u).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transform_count_per_application() {
        for d in 1..=3 {
            let beta = CoefficientField::preset("quartic", d).unwrap();
            let plan = TransformPlan::for_cutoff(5, TransformMode::Reference).unwrap();
            for alpha in [CoefficientField::zero(d).unwrap(), CoefficientField::preset("cos", d).unwrap()] {
                let spec = ProblemSpec::isotropic(5, beta.clone(), alpha).unwrap();
                let op = GalerkinOperator::new(&spec, &plan).unwrap();
                plan.reset_transform_count();
                op.apply_system(&SpectralCoeffs::filled(d, 4, 1.0)).unwrap();
                let want = 2 * d + if op.has_reaction() { 2 } else { 0 };
                assert_eq!(plan.transform_count(), want);
            }
        }
    }
}
