//! Nonconvex Hamilton–Jacobi Hamiltonians built by nested min-max of quasiconvex
//! and quasiconcave pieces, with tools to check the contact-value hypotheses and
//! to compare the explicit effective Hamiltonian against numerical homogenization.

pub mod effective;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod media;
pub mod solver;
pub mod stable_pairs;

pub use error::{Error, Result};
