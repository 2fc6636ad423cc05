//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SieveError {
    /// Model construction or validation failed (window, weight, density parameters).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A function evaluated to a non-finite value at a quadrature node.
    #[error("non-finite integrand value at x = {node}: {detail}")]
    Evaluation { node: f64, detail: String },

    /// Quadrature order or panel configuration out of range.
    #[error("invalid quadrature setup: {0}")]
    Quadrature(String),

    /// A point fell outside the estimation window.
    #[error("point x = {x} outside window [{lo}, {hi}]")]
    OutsideWindow { x: f64, lo: f64, hi: f64 },

    /// Basis construction failed (Gram matrix numerically singular).
    #[error("degree too high for stable orthonormalization: {0}")]
    DegreeTooHigh(String),

    /// Projection bias came out negative beyond tolerance.
    #[error("numerical consistency failure: {0}")]
    NumericalConsistency(String),

    /// Risk decomposition mismatch beyond tolerance.
    #[error("quadrature inconsistency: {0}")]
    QuadratureInconsistency(String),

    /// No model in the collection satisfies the sup-norm admissibility cut.
    #[error("horizon T = {t} too small: smallest sup-norm constant is {min_sup_sq}")]
    HorizonTooSmall { t: f64, min_sup_sq: f64 },

    /// Rejection sampling detected a density value above its envelope.
    #[error("sampling envelope violated at x = {x}: density {density} > bound {bound}")]
    EnvelopeViolation { x: f64, density: f64, bound: f64 },

    /// Configuration file problem; names the offending key.
    #[error("config error: {0}")]
    Config(String),

    /// A Monte Carlo replication failed; carries the replication id.
    #[error("replication {rep} failed: {source}")]
    Replication {
        rep: u64,
        #[source]
        source: Box<SieveError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SieveError>;
