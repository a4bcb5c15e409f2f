//! Sparse iterative solvers built around ellipsoid-membership and
//! residual-centering iterations, with CG and restarted GMRES baselines,
//! matrix generators, and a benchmark harness.

pub mod auxsolve;
pub mod baselines;
pub mod bench;
pub mod cta;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod mm;
pub mod operator;
pub mod report;
pub mod triangle;
pub mod sparse;
pub mod vecops;

pub use error::{Result, SolverError};
pub use report::{SolveReport, ToleranceMode, Verdict};
pub use operator::{HMode, OperatorH};
pub use sparse::SparseMatrix;
