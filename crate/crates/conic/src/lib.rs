//! Interior-point solver for Hermitian semidefinite programs whose
//! constraint matrices are diagonal selectors or combinations of shared
//! (possibly low-rank) atoms, plus a nonnegative linear block.

pub mod ipm;
pub mod linalg;
pub mod problem;

pub use ipm::{ConicSolver, InteriorPoint, IpmSettings, SolveStatus, Solution};
pub use linalg::{CMatrix, CVector};
pub use problem::{Atom, ConicProblem, Constraint, PsdTerm};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
}
