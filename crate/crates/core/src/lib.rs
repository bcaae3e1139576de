//! Legendre-Galerkin discretization of `-div(β ∇u) + α u = f` on `(-1,1)^d`
//! with homogeneous Dirichlet data, solved by preconditioned conjugate
//! gradients. The operator is applied matrix-free through discrete Legendre
//! transforms; the preconditioner is the Galerkin matrix of truncated
//! coefficient series, applied through its ILU(0) factors.

pub mod error;
pub mod examples;
pub mod field;
pub mod legendre;
pub mod operator;
pub mod oracle;
pub mod pcg;
pub mod precond;
pub mod sparse;
mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use examples::{run_benchmark, BenchmarkRow, Example, SweepOptions};
pub use field::{CoefficientField, Diffusion, Parity, ProblemSpec, SpectralCoeffs};
pub use legendre::GaussRule;
pub use operator::GalerkinOperator;
pub use pcg::{pcg_solve, PreconditionerChoice, SolveReport, SolverConfig};
pub use precond::{assemble_m, Truncation};
pub use sparse::{ilu0, IluFactors, SparseMatrix};
pub use transforms::{TransformMode, TransformPlan};
