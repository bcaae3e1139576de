//! Symmetry, positivity and accuracy of the matrix-free operator.

use std::f64::consts::PI;

use legendre_pcg::legendre::eval_phi_all;
use legendre_pcg::oracle::dense_assemble_parts;
use legendre_pcg::{
    pcg_solve, CoefficientField, Diffusion, Example, GalerkinOperator, GaussRule, ProblemSpec,
    SolverConfig, SpectralCoeffs, TransformMode, TransformPlan,
};
use proptest::prelude::*;

fn dot(a: &SpectralCoeffs, b: &SpectralCoeffs) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn system_is_symmetric_and_positive(ex in 0usize..8, seed in any::<u64>()) {
        let ex = Example::ALL[ex];
        let n = [64, 20, 10][ex.dim() - 1];
        let spec = ex.spec(n).unwrap();
        let plan = TransformPlan::for_cutoff(n, TransformMode::auto(spec.grid_order())).unwrap();
        let op = GalerkinOperator::new(&spec, &plan).unwrap();
        let u = SpectralCoeffs::random(ex.dim(), spec.modes(), seed);
        let v = SpectralCoeffs::random(ex.dim(), spec.modes(), seed.wrapping_add(1));
        let au = op.apply_system(&u).unwrap();
        let av = op.apply_system(&v).unwrap();
        let (l, r) = (dot(&au, &v), dot(&u, &av));
        prop_assert!((l - r).abs() <= 1e-11 * l.abs().max(1.0), "{} vs {}", l, r);
        prop_assert!(dot(&au, &u) > 0.0);
    }
}

#[test]
fn load_vector_of_a_basis_function_is_a_mass_column() {
    // f = phi_3 pointwise gives F_k = (phi_3, phi_k)
    let n = 24;
    let f = CoefficientField::custom(1, "phi3", |p| eval_phi_all(4, p[0])[3]).unwrap();
    let spec = ProblemSpec::new(
        n,
        Diffusion::Isotropic(CoefficientField::constant(1, 1.0).unwrap()),
        CoefficientField::zero(1).unwrap(),
        f,
    )
    .unwrap();
    let plan = TransformPlan::for_cutoff(n, TransformMode::Reference).unwrap();
    let op = GalerkinOperator::new(&spec, &plan).unwrap();
    let rhs = op.assemble_rhs();
    let mass_spec = ProblemSpec::isotropic(
        n,
        CoefficientField::constant(1, 1.0).unwrap(),
        CoefficientField::constant(1, 1.0).unwrap(),
    )
    .unwrap();
    let b = dense_assemble_parts(&mass_spec, &plan, None).unwrap().b;
    for k in 0..spec.modes() {
        assert!((rhs.data()[k] - b[(k, 3)]).abs() <= 1e-12, "k={k}");
    }
}

#[test]
fn manufactured_solution_in_two_dimensions() {
    let n = 24;
    let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let f = CoefficientField::custom(2, "forcing", move |p| 2.0 * PI * PI * exact(p[0], p[1])).unwrap();
    let spec = ProblemSpec::new(
        n,
        Diffusion::Isotropic(CoefficientField::constant(2, 1.0).unwrap()),
        CoefficientField::zero(2).unwrap(),
        f,
    )
    .unwrap();
    let plan = TransformPlan::for_cutoff(n, TransformMode::Reference).unwrap();
    let op = GalerkinOperator::new(&spec, &plan).unwrap();
    let rhs = op.assemble_rhs();
    let (u, rep) = pcg_solve(
        &spec,
        &SolverConfig::truncated(0, 0),
        &plan,
        &rhs,
        &SpectralCoeffs::zeros_for(&spec),
    )
    .unwrap();
    assert!(rep.converged);
    let k = spec.modes();
    let rule = GaussRule::new(40).unwrap();
    let tables: Vec<Vec<f64>> = rule.nodes().iter().map(|&x| eval_phi_all(k, x)).collect();
    let mut err2 = 0.0;
    for (a, wa) in rule.weights().iter().enumerate() {
        for (b, wb) in rule.weights().iter().enumerate() {
            let mut val = 0.0;
            for j in 0..k {
                for i in 0..k {
                    val += u.data()[i + k * j] * tables[a][i] * tables[b][j];
                }
            }
            let e = val - exact(rule.nodes()[a], rule.nodes()[b]);
            err2 += wa * wb * e * e;
        }
    }
    assert!(err2.sqrt() < 1e-10, "L2 error {:e}", err2.sqrt());
}

#[test]
fn reference_and_accelerated_operators_agree() {
    let spec = Example::Example1a.spec(1024).unwrap();
    let reference = TransformPlan::for_cutoff(1024, TransformMode::Reference).unwrap();
    let fast = TransformPlan::for_cutoff(1024, TransformMode::Accelerated).unwrap();
    let u = SpectralCoeffs::random(1, spec.modes(), 3);
    let a = GalerkinOperator::new(&spec, &reference).unwrap().apply_system(&u).unwrap();
    let b = GalerkinOperator::new(&spec, &fast).unwrap().apply_system(&u).unwrap();
    let scale = a.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.data().iter().zip(b.data()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-10 * scale, "{diff:e} vs scale {scale:e}");
}
