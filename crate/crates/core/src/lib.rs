//! Buckling eigenvalues `Delta^2 u = Lambda (-Delta) u` on geodesic caps of
//! the unit sphere `S^n`, and evaluation of the universal inequalities that
//! constrain them.
//!
//! - [`spectrum`]: domain and spectrum types, multiplicity bookkeeping, file format.
//! - [`bounds`]: the inequalities and closed-form bounds on `Lambda_{k+1}`.
//! - [`solver`]: the cap solver (mode reduction, finite differences, refinement).
//! - [`gevp`]: dense symmetric-definite generalized eigensolver.
//! - [`harness`]: verification campaigns and reports.

pub mod bounds;
pub mod gevp;
pub mod harness;
pub mod parallel;
pub mod solver;
pub mod spectrum;
pub mod summation;

pub use bounds::{BoundReport, BoundsError, CheckRecord, InequalityId};
pub use parallel::Execution;
pub use solver::{solve_cap, CapSolution, EigenPair, SolveOptions, SolverError};
pub use spectrum::{CapDomain, Spectrum, SpectrumError};
