//! Coherence-based certificates that random column submatrices of a matrix
//! with unit-norm columns are near-isometries, with exact and Monte Carlo
//! checks of the inequalities behind them.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`] holds the dense matrix type and the norms everything else uses.
//! * [`ensembles`] generates seeded test matrices and random selector masks.
//! * [`certificate`] evaluates the closed-form hypotheses, bounds and constants.
//! * [`oracles`] checks the chaos moment inequality exactly and evaluates the
//!   matrix Chernoff tail bound.
//! * [`montecarlo`] estimates tail probabilities with exact binomial
//!   confidence bounds and compares them against the analytic inequalities.

// `!(x > 0.0)` is used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod ensembles;
mod error;
pub mod matrix;
pub mod montecarlo;
pub mod oracles;
mod par;
pub mod rng;
mod sum;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, NormReport};
