//! Nonparametric estimation of Lévy densities by penalized projection on
//! piecewise-polynomial sieves, plus a Monte Carlo harness that verifies
//! the estimator's risk identities, oracle behavior, convergence rates, and
//! the Poisson concentration bounds behind them.
//!
//! The library is organized around the estimation pipeline:
//!
//! * [`model`] — ground-truth Lévy models, reference measures, and weighted
//!   integrals;
//! * [`simulate`] — exact jump samples and discretely observed increments;
//! * [`bases`] — orthonormal piecewise-polynomial sieve spaces;
//! * [`estimate`] — projection estimators, penalties, and model selection;
//! * [`discrete`] — increment-based statistics and thresholding;
//! * [`harness`] — config-driven experiments and CSV reporting (the
//!   `levy-sieve` binary is a thin wrapper over [`harness::run`]).

pub mod bases;
pub mod discrete;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod model;
pub mod quad;
pub mod simulate;
pub mod stats;

pub use error::{Result, SieveError};
