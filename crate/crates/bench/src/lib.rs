//! Shared fixtures for the criterion benchmarks.

use legendre_pcg::{Example, ProblemSpec, SpectralCoeffs, TransformMode, TransformPlan};

/// Example problem with an automatically chosen transform plan.
pub fn fixture(example: Example, n: usize) -> (ProblemSpec, TransformPlan) {
    let spec = example.spec(n).expect("valid example size");
    let plan = TransformPlan::for_cutoff(n, TransformMode::auto(n + 1)).expect("valid plan");
    (spec, plan)
}

/// Deterministic input vector for operator timings.
pub fn input(spec: &ProblemSpec) -> SpectralCoeffs {
    SpectralCoeffs::random(spec.dim(), spec.modes(), 42)
}
