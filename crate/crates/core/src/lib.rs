//! Numerical laboratory for quantum Krylov subspace diagonalisation.
//!
//! Hamiltonians are built as Pauli sums, diagonalised exactly, and every
//! Krylov matrix element is evaluated from the resulting `(energy, weight)`
//! pairs. On top of that sit the regularised solver, the measurement-cost
//! model, Gaussian noise simulation and a Monte Carlo LCU estimator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bases;
pub mod bench;
pub mod bench_config;
pub mod cost;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod linalg;
pub mod mc_lcu;
pub mod models;
pub mod noise;
pub mod pauli;
pub mod quadrature;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
