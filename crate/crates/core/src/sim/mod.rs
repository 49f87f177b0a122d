//! Direct discrete solves on finite metastructures.

pub mod bounded;
pub mod convergence;
pub mod load;
pub mod sparse;
pub mod torus;

pub use bounded::{build_bounded, solve_equilibrium_bounded, BoundedMetastructure, BoundedSolution, ConstraintPolicy, Domain};
pub use convergence::{convergence_study, period_of, ConvergenceRow, ConvergenceTable};
pub use load::{LoadField, LoadMode};
pub use torus::{
    continuum_min_energy, continuum_min_energy_from_moduli, solve_equilibrium_torus, solver, solver_registry,
    FourierSolver, SparseSolver, TorusMetastructure, TorusSolution, TorusSolver,
};
