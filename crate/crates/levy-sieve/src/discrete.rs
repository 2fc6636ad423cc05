//! Discrete-data approximations of the jump statistics: the increment sum
//! I_n(f), its thresholded variant, and a projection estimator driven by
//! increments instead of jumps.
//!
//! Increments exactly equal to zero are skipped everywhere; all test
//! functions used here satisfy f(0) = 0 and the exclusion makes the pure
//! jump case (sigma = 0) exact.

use crate::bases::LinearModel;
use crate::error::{Result, SieveError};
use crate::estimate::ProjectionEstimate;
use crate::simulate::IncrementSample;

/// Squared-increment threshold r(h) separating jump cells from diffusion
/// cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// No filtering: every nonzero increment is kept.
    Zero,
    /// Fixed threshold independent of the step.
    Constant(f64),
    /// r(h) = kappa h^gamma with kappa > 0 and 0 < gamma < 1, so that
    /// r(h) -> 0 while h / r(h) -> 0.
    PowerLaw { kappa: f64, gamma: f64 },
}

impl ThresholdRule {
    pub fn power_law(kappa: f64, gamma: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(SieveError::Config(format!(
                "threshold.kappa must be positive, got {kappa}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(SieveError::Config(format!(
                "threshold.gamma must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(ThresholdRule::PowerLaw { kappa, gamma })
    }

    /// Default rule h^0.9: well above the sigma sqrt(h) diffusion scale at
    /// desk-scale step counts, still vanishing with h.
    pub fn default_power_law() -> Self {
        ThresholdRule::PowerLaw { kappa: 1.0, gamma: 0.9 }
    }

    pub fn threshold(&self, h: f64) -> f64 {
        match *self {
            ThresholdRule::Zero => 0.0,
            ThresholdRule::Constant(r) => r,
            ThresholdRule::PowerLaw { kappa, gamma } => kappa * h.powf(gamma),
        }
    }
}

/// I_n(f) = sum_k f(Delta_k X), skipping increments exactly equal to zero.
pub fn integral_stat<F: Fn(f64) -> f64>(incr: &IncrementSample, f: F) -> f64 {
    incr.values()
        .iter()
        .filter(|&&dx| dx != 0.0)
        .map(|&dx| f(dx))
        .sum()
}

/// Thresholded variant: sum of f(Delta_k X) over increments whose square
/// exceeds r(h).
pub fn thresholded_stat<F: Fn(f64) -> f64>(
    incr: &IncrementSample,
    f: F,
    rule: &ThresholdRule,
) -> f64 {
    let r = rule.threshold(incr.step());
    incr.values()
        .iter()
        .filter(|&&dx| dx * dx > r)
        .map(|&dx| f(dx))
        .sum()
}

/// Projection coefficients from increments: an increment contributes like a
/// jump of its own size when it survives the threshold and lands in the
/// window.
pub fn fit_projection_discrete<'a>(
    incr: &IncrementSample,
    model: &'a LinearModel,
    rule: &ThresholdRule,
) -> ProjectionEstimate<'a> {
    let t = incr.horizon();
    let r = rule.threshold(incr.step());
    let w = model.window();
    let per = model.degree() + 1;
    let mut beta = vec![0.0; model.dim()];
    let mut vals = [0.0; 8];
    for &dx in incr.values() {
        if dx * dx > r && w.contains(dx) && dx != 0.0 {
            let base = model.eval_cell_basis(dx, &mut vals[..per]);
            for rr in 0..per {
                beta[base + rr] += vals[rr];
            }
        }
    }
    let inv_t = 1.0 / t;
    for b in &mut beta {
        *b *= inv_t;
    }
    ProjectionEstimate::from_parts(model, beta, t)
}
