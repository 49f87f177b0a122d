//! Fourier-space homogenization of periodic beam lattices.
//!
//! The crate assembles the exact dynamical matrix `D(k)` of a beam lattice,
//! computes its continuum limit `D_0(k)` by scaling and localization, fits
//! micropolar moduli to the limit and cross-checks everything against direct
//! discrete equilibrium solves.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod catalog;
pub mod error;
pub mod fourier;
pub mod kinematics;
pub mod lattice;
pub mod limit;
pub mod moduli;
pub mod report;
pub mod sim;

pub use error::{Error, Result, Violation, Warning};
pub use fourier::{CMatrix, CVector};
pub use lattice::{validate, Metamaterial, MetamaterialSpec};
