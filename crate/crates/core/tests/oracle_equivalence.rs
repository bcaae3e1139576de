//! Matrix-free operator and assembled preconditioner against the dense
//! quadrature oracle.

use legendre_pcg::oracle::{dense_assemble_parts, dense_preconditioner};
use legendre_pcg::precond::{Expansion, Integration, PrecondOptions};
use legendre_pcg::{
    assemble_m, CoefficientField, Diffusion, Example, GalerkinOperator, ProblemSpec, SpectralCoeffs,
    TransformMode, TransformPlan, Truncation,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

/// Presets that stay positive on the cube in every dimension.
const POSITIVE: &[&str] = &["quartic", "exp", "exp2", "cos_sin", "runge", "one"];

fn max_n(dim: usize) -> usize {
    match dim {
        1 => 64,
        2 => 24,
        _ => 12,
    }
}

/// Largest column discrepancy relative to the column norm.
fn column_defect(op: &GalerkinOperator<'_>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut e = SpectralCoeffs::zeros(op.dim(), op.modes());
        e.data_mut()[j] = 1.0;
        let ya = op.apply_a(&e).unwrap();
        let yb = op.apply_b(&e).unwrap();
        for (got, want) in [(ya, a.column(j)), (yb, b.column(j))] {
            let scale = want.norm().max(1.0);
            let diff: f64 = got
                .data()
                .iter()
                .zip(want.iter())
                .map(|(g, w)| (g - w) * (g - w))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / scale);
        }
    }
    worst
}

fn check_spec(spec: &ProblemSpec) -> f64 {
    let plan = TransformPlan::for_cutoff(spec.n(), TransformMode::Reference).unwrap();
    let op = GalerkinOperator::new(spec, &plan).unwrap();
    let dense = dense_assemble_parts(spec, &plan, None).unwrap();
    column_defect(&op, &dense.a, &dense.b)
}

#[test]
fn example_problems_match_at_largest_sizes() {
    for ex in Example::ALL {
        let n = max_n(ex.dim());
        let defect = check_spec(&ex.spec(n).unwrap());
        assert!(defect <= TOL, "{ex} N={n}: {defect:e}");
    }
}

#[test]
fn every_preset_as_reaction_coefficient() {
    for &name in CoefficientField::preset_names() {
        for dim in 1..=3 {
            let spec = ProblemSpec::isotropic(
                max_n(dim),
                CoefficientField::constant(dim, 1.0).unwrap(),
                CoefficientField::preset(name, dim).unwrap(),
            )
            .unwrap();
            let defect = check_spec(&spec);
            assert!(defect <= TOL, "{name} d={dim}: {defect:e}");
        }
    }
}

fn arb_case() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..=3).prop_flat_map(|dim| {
        (
            Just(dim),
            3..=max_n(dim),
            0..POSITIVE.len(),
            0..CoefficientField::preset_names().len(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn random_problems_match((dim, n, bi, ai) in arb_case()) {
        let beta = CoefficientField::preset(POSITIVE[bi], dim).unwrap();
        let alpha = CoefficientField::preset(CoefficientField::preset_names()[ai], dim).unwrap();
        let spec = ProblemSpec::isotropic(n, beta, alpha).unwrap();
        let defect = check_spec(&spec);
        prop_assert!(defect <= TOL, "d={} N={} defect {:e}", dim, n, defect);
    }

    #[test]
    fn random_separable_problems_match(n in 3usize..=24, f0 in 0usize..4, f1 in 0usize..4) {
        let names = ["exp2", "cos", "quartic", "one"];
        let diffusion = Diffusion::PerAxis(vec![
            CoefficientField::separable(&[names[f0], "one"]).unwrap(),
            CoefficientField::separable(&["one", names[f1]]).unwrap(),
        ]);
        let spec = ProblemSpec::new(
            n,
            diffusion,
            CoefficientField::separable(&[names[f1], names[f0]]).unwrap(),
            CoefficientField::constant(2, 1.0).unwrap(),
        )
        .unwrap();
        let defect = check_spec(&spec);
        prop_assert!(defect <= TOL, "N={} defect {:e}", n, defect);
    }
}

fn sparse_vs_dense(spec: &ProblemSpec, trunc: &Truncation, options: &PrecondOptions) -> f64 {
    let plan = TransformPlan::for_cutoff(spec.n(), TransformMode::Reference).unwrap();
    let m = legendre_pcg::precond::assemble_m_with(spec, trunc, options, Some(plan.rule())).unwrap();
    let dense = dense_preconditioner(spec, &plan, trunc, options).unwrap();
    let got = DMatrix::from_row_slice(m.n(), m.n(), &m.to_dense());
    (got - &dense).abs().max() / dense.abs().max()
}

#[test]
fn preconditioner_matches_dense_counterpart() {
    let cases = [
        (Example::Example1a, 40, Truncation::new(6, 2)),
        (Example::Example1b, 33, Truncation::new(4, 0)),
        (Example::Example2a, 14, Truncation::new(6, 3)),
        (Example::Example2b, 12, Truncation::new(7, 0)),
        (Example::Example3a, 8, Truncation::new(4, 2)),
        (Example::Example4a, 12, Truncation::per_axis(vec![4, 3], 0)),
        (Example::Example4b, 7, Truncation::per_axis(vec![4, 3, 3], 0)),
    ];
    for (ex, n, trunc) in cases {
        let spec = ex.spec(n).unwrap();
        for integration in [Integration::Collocated, Integration::Exact] {
            for expansion in [Expansion::Interpolation, Expansion::Projection] {
                let options = PrecondOptions {
                    expansion,
                    integration,
                };
                let defect = sparse_vs_dense(&spec, &trunc, &options);
                assert!(defect <= 1e-12, "{ex} N={n} {options:?}: {defect:e}");
            }
        }
    }
}

#[test]
fn polynomial_diffusion_gives_exact_preconditioner() {
    // the quartic coefficient is a degree-8 polynomial, so t1 = 8 loses nothing
    let spec = Example::Example1a.spec(48).unwrap();
    let plan = TransformPlan::for_cutoff(48, TransformMode::Reference).unwrap();
    let m = assemble_m(
        &ProblemSpec::isotropic(48, spec.diffusion().axis(0).clone(), CoefficientField::zero(1).unwrap())
            .unwrap(),
        &Truncation::new(8, 0),
    )
    .unwrap();
    let a = dense_assemble_parts(&spec, &plan, None).unwrap().a;
    let got = DMatrix::from_row_slice(m.n(), m.n(), &m.to_dense());
    let defect = (got - &a).abs().max() / a.abs().max();
    assert!(defect <= 1e-13, "{defect:e}");
}
