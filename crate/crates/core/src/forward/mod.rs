//! Boundary-integral forward solver: the simulated measurement operator.

pub mod ops;
pub mod solver;

pub use solver::{dtn_background, BoundaryData, DtnSolver, FieldSolution, ForwardError, SolverConfig};
