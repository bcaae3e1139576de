//! Properties of the preconditioned CG driver.

use legendre_pcg::examples::{benchmark_rhs, TableRow};
use legendre_pcg::oracle::dense_assemble;
use legendre_pcg::pcg::residual_norm;
use legendre_pcg::{
    pcg_solve, run_benchmark, CoefficientField, Error, Example, GalerkinOperator,
    PreconditionerChoice, ProblemSpec, SolverConfig, SpectralCoeffs, SweepOptions, TransformMode,
    TransformPlan, Truncation,
};
use nalgebra::DVector;

fn solve(spec: &ProblemSpec, config: &SolverConfig) -> (SpectralCoeffs, legendre_pcg::SolveReport) {
    let plan = TransformPlan::for_cutoff(spec.n(), TransformMode::auto(spec.grid_order())).unwrap();
    let f = benchmark_rhs(spec);
    pcg_solve(spec, config, &plan, &f, &SpectralCoeffs::zeros_for(spec)).unwrap()
}

#[test]
fn residual_certificate() {
    let cases = [
        (Example::Example1a, 320, Truncation::new(6, 2)),
        (Example::Example1b, 640, Truncation::new(4, 0)),
        (Example::Example2a, 40, Truncation::new(6, 3)),
        (Example::Example3b, 12, Truncation::new(5, 0)),
        (Example::Example4a, 40, Truncation::per_axis(vec![4, 3], 0)),
    ];
    for (ex, n, trunc) in cases {
        let spec = ex.spec(n).unwrap();
        let config = SolverConfig::default().with_truncation(trunc);
        let (x, rep) = solve(&spec, &config);
        assert!(rep.converged, "{ex} N={n}");
        assert!(rep.final_relative_residual <= config.epsilon);
        assert_eq!(rep.residual_history.len(), rep.iterations + 1);
        let plan = TransformPlan::for_cutoff(n, TransformMode::Reference).unwrap();
        let op = GalerkinOperator::new(&spec, &plan).unwrap();
        let r = residual_norm(&op, &benchmark_rhs(&spec), &x).unwrap();
        assert!(
            r <= 1.05 * config.epsilon * rep.rhs_norm,
            "{ex} N={n}: recomputed {r:e} vs {:e}",
            config.epsilon * rep.rhs_norm
        );
    }
}

/// Textbook CG on the dense oracle matrix, ones right-hand side.
fn dense_cg_iterations(spec: &ProblemSpec, epsilon: f64) -> usize {
    let plan = TransformPlan::for_cutoff(spec.n(), TransformMode::Reference).unwrap();
    let a = dense_assemble(spec, &plan, None).unwrap();
    let f = DVector::from_element(a.nrows(), 1.0);
    let mut r = f.clone();
    let mut p = r.clone();
    let mut rho: f64 = r.dot(&r);
    let mut k = 0;
    while rho.sqrt() > epsilon * f.norm() && k < 10 * a.nrows() {
        let w = &a * &p;
        let step = rho / p.dot(&w);
        r -= step * &w;
        let next = r.dot(&r);
        p = &r + (next / rho) * &p;
        rho = next;
        k += 1;
    }
    k
}

#[test]
fn finite_termination_without_preconditioner() {
    let config = SolverConfig {
        epsilon: 1e-10,
        ..SolverConfig::default()
    };
    let runge = ProblemSpec::isotropic(
        41,
        CoefficientField::preset("runge", 1).unwrap(),
        CoefficientField::preset("cos", 1).unwrap(),
    )
    .unwrap();
    let smooth = ProblemSpec::isotropic(
        41,
        CoefficientField::preset("cos_sin", 1).unwrap(),
        CoefficientField::preset("exp", 1).unwrap(),
    )
    .unwrap();
    // n + 5 holds where rounding does not delay CG
    for spec in [smooth.clone(), Example::Example2b.spec(7).unwrap(), Example::Example3a.spec(4).unwrap()] {
        let n = spec.unknowns();
        assert!(n <= 40);
        let (_, rep) = solve(&spec, &config);
        assert!(rep.converged);
        assert!(rep.iterations <= n + 5, "n = {n}: {} iterations", rep.iterations);
    }
    // with well separated large eigenvalues textbook CG also overshoots;
    // the matrix-free driver must track it
    for spec in [runge, smooth, Example::Example1a.spec(30).unwrap()] {
        let (_, rep) = solve(&spec, &config);
        let dense = dense_cg_iterations(&spec, config.epsilon);
        assert!(rep.iterations.abs_diff(dense) <= 1, "{} vs dense {dense}", rep.iterations);
    }
}

#[test]
fn determinism() {
    let options = SweepOptions {
        threads: 2,
        ..SweepOptions::default()
    };
    let run = || {
        run_benchmark(
            Example::Example2a,
            &[20, 24],
            &[Truncation::new(0, 0), Truncation::new(6, 3)],
            &options,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 4);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.n, &x.truncation), (y.n, &y.truncation));
        assert_eq!(x.report.iterations, y.report.iterations);
        assert_eq!(x.report.final_relative_residual, y.report.final_relative_residual);
    }
    let spec = Example::Example3a.spec(8).unwrap();
    let config = SolverConfig::truncated(4, 2);
    assert_eq!(solve(&spec, &config).0, solve(&spec, &config).0);
}

fn dominates(a: &Truncation, b: &Truncation, dim: usize) -> bool {
    a.alpha >= b.alpha && (0..dim).all(|i| a.beta_cutoff(i) >= b.beta_cutoff(i))
}

#[test]
fn larger_truncation_never_needs_more_iterations() {
    for ex in Example::ALL {
        let n = ex.n_list()[0];
        let rows: Vec<TableRow> = ex.table();
        let truncations: Vec<Truncation> = rows.iter().map(|r| r.truncation.clone()).collect();
        let report = run_benchmark(ex, &[n], &truncations, &SweepOptions::default()).unwrap();
        for a in &report {
            for b in &report {
                if a.truncation != b.truncation && dominates(&a.truncation, &b.truncation, ex.dim()) {
                    assert!(
                        a.report.iterations <= b.report.iterations,
                        "{ex} N={n}: {:?} took {} > {:?} took {}",
                        a.truncation,
                        a.report.iterations,
                        b.truncation,
                        b.report.iterations
                    );
                }
            }
        }
    }
}

#[test]
fn reference_spot_values() {
    let (_, rep) = solve(&Example::Example1a.spec(320).unwrap(), &SolverConfig::truncated(6, 2));
    assert!((5..=9).contains(&rep.iterations), "{}", rep.iterations);
    let (_, rep) = solve(&Example::Example3b.spec(16).unwrap(), &SolverConfig::truncated(5, 0));
    assert!((6..=12).contains(&rep.iterations), "{}", rep.iterations);
}

#[test]
fn trivial_diagonal_case() {
    let spec = ProblemSpec::isotropic(
        64,
        CoefficientField::constant(1, 1.0).unwrap(),
        CoefficientField::zero(1).unwrap(),
    )
    .unwrap();
    let (_, rep) = solve(&spec, &SolverConfig::truncated(0, 0));
    assert_eq!(rep.iterations, 1);
    assert_eq!(rep.preconditioner_nnz, Some(63));
}

#[test]
fn indefinite_system_is_reported() {
    let spec = ProblemSpec::isotropic(
        20,
        CoefficientField::constant(1, 1.0).unwrap(),
        CoefficientField::constant(1, -1e4).unwrap(),
    )
    .unwrap();
    let plan = TransformPlan::for_cutoff(20, TransformMode::Reference).unwrap();
    let f = SpectralCoeffs::filled(1, 19, 1.0);
    let err = pcg_solve(&spec, &SolverConfig::default(), &plan, &f, &SpectralCoeffs::zeros(1, 19)).unwrap_err();
    assert!(matches!(err, Error::Indefinite { .. }), "{err}");
}

#[test]
fn none_and_truncated_agree_on_solution() {
    let spec = Example::Example1b.spec(64).unwrap();
    let (x0, _) = solve(&spec, &SolverConfig::default());
    let (x1, rep) = solve(&spec, &SolverConfig::truncated(4, 0));
    assert!(matches!(rep.config.preconditioner, PreconditionerChoice::Truncated(_)));
    let diff: f64 = x0.data().iter().zip(x1.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-8 * x0.norm(), "{diff:e}");
}
