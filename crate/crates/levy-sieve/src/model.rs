//! Ground-truth Lévy models: estimation windows, reference measures, the
//! built-in density catalog with closed-form constants, and the weighted
//! integrals everything downstream consumes.
//!
//! A model carries a jump density `p` on a window `D` away from the origin
//! together with a reference measure `eta(dx) = w(x) dx`; the estimation
//! target is `s = p / w`, which must be positive, bounded, and square
//! integrable against `eta`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Result, SieveError};
use crate::quad::{
    integrate_panels, panels, split_at_breakpoints, Breakpoint, GaussLegendre, DEFAULT_ORDER,
    DEFAULT_PANELS,
};

/// Estimation window [lo, hi], an interval that does not contain the origin
/// in its interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SieveError::InvalidModel(format!(
                "window [{lo}, {hi}] must be a finite nonempty interval"
            )));
        }
        if lo < 0.0 && hi > 0.0 {
            return Err(SieveError::InvalidModel(format!(
                "window [{lo}, {hi}] must not contain the origin"
            )));
        }
        Ok(Window { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Lebesgue,
    InverseSquare,
    CustomGrid,
}

/// Reference measure eta(dx) = w(x) dx on a window.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    window: Window,
    weight: Weight,
}

#[derive(Debug, Clone)]
enum Weight {
    Lebesgue,
    InverseSquare,
    /// Piecewise-linear interpolation of positive weights on a grid
    /// spanning the window.
    CustomGrid {
        xs: Arc<[f64]>,
        ws: Arc<[f64]>,
    },
}

impl ReferenceMeasure {
    pub fn lebesgue(window: Window) -> Self {
        ReferenceMeasure {
            window,
            weight: Weight::Lebesgue,
        }
    }

    /// w(x) = x^-2. Only windows strictly away from zero keep eta finite,
    /// so an endpoint at the origin is rejected.
    pub fn inverse_square(window: Window) -> Result<Self> {
        if window.lo <= 0.0 && window.hi >= 0.0 {
            return Err(SieveError::InvalidModel(format!(
                "inverse-square measure needs a window bounded away from 0, got [{}, {}]",
                window.lo, window.hi
            )));
        }
        Ok(ReferenceMeasure {
            window,
            weight: Weight::InverseSquare,
        })
    }

    /// Piecewise-linear weight through `(xs[i], ws[i])`; the grid must be
    /// strictly increasing and cover the window, and all weights positive.
    pub fn custom_grid(window: Window, xs: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        if xs.len() != ws.len() || xs.len() < 2 {
            return Err(SieveError::InvalidModel(
                "custom grid needs at least two matching (x, w) pairs".into(),
            ));
        }
        if !xs.windows(2).all(|p| p[0] < p[1]) {
            return Err(SieveError::InvalidModel(
                "custom grid abscissae must be strictly increasing".into(),
            ));
        }
        if xs[0] > window.lo || *xs.last().unwrap() < window.hi {
            return Err(SieveError::InvalidModel(
                "custom grid must cover the window".into(),
            ));
        }
        if !ws.iter().all(|&w| w.is_finite() && w > 0.0) {
            return Err(SieveError::InvalidModel(
                "custom grid weights must be positive and finite".into(),
            ));
        }
        Ok(ReferenceMeasure {
            window,
            weight: Weight::CustomGrid {
                xs: xs.into(),
                ws: ws.into(),
            },
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn kind(&self) -> MeasureKind {
        match self.weight {
            Weight::Lebesgue => MeasureKind::Lebesgue,
            Weight::InverseSquare => MeasureKind::InverseSquare,
            Weight::CustomGrid { .. } => MeasureKind::CustomGrid,
        }
    }

    /// Weight w(x) of eta against Lebesgue measure.
    pub fn weight(&self, x: f64) -> f64 {
        match &self.weight {
            Weight::Lebesgue => 1.0,
            Weight::InverseSquare => 1.0 / (x * x),
            Weight::CustomGrid { xs, ws } => {
                let i = match xs.partition_point(|&p| p <= x) {
                    0 => 0,
                    p if p >= xs.len() => xs.len() - 2,
                    p => p - 1,
                };
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ws[i] + t * (ws[i + 1] - ws[i])
            }
        }
    }

    /// Points where the weight itself is only piecewise smooth.
    pub(crate) fn breakpoints(&self) -> Vec<Breakpoint> {
        match &self.weight {
            Weight::CustomGrid { xs, .. } => xs
                .iter()
                .filter(|&&x| x > self.window.lo && x < self.window.hi)
                .map(|&x| Breakpoint::kink(x))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Inverse-square weights want geometrically graded panels toward the
    /// endpoint nearest the origin.
    pub(crate) fn wants_geometric_panels(&self) -> bool {
        matches!(self.weight, Weight::InverseSquare)
    }

    /// Panel grid over the window (or a sub-interval), split at the given
    /// integrand breakpoints plus the measure's own.
    pub(crate) fn panel_grid(
        &self,
        lo: f64,
        hi: f64,
        count: usize,
        extra_breaks: &[Breakpoint],
    ) -> Vec<(f64, f64)> {
        let base = panels(lo, hi, count, self.wants_geometric_panels());
        let mut breaks = self.breakpoints();
        breaks.extend_from_slice(extra_breaks);
        split_at_breakpoints(base, &breaks)
    }
}

/// Composite Gauss-Legendre approximation of `int_D f(x) w(x) dx` over the
/// measure's fixed panel grid.
pub fn eta_integral<F: Fn(f64) -> f64>(
    f: F,
    measure: &ReferenceMeasure,
    order: usize,
) -> Result<f64> {
    eta_integral_with_breakpoints(f, measure, order, &[])
}

pub(crate) fn eta_integral_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    measure: &ReferenceMeasure,
    order: usize,
    breaks: &[Breakpoint],
) -> Result<f64> {
    let rule = GaussLegendre::new(order)?;
    let w = measure.window();
    let grid = measure.panel_grid(w.lo, w.hi, DEFAULT_PANELS, breaks);
    integrate_panels(&rule, &grid, |x| f(x) * measure.weight(x))
}

/// Built-in test densities. Each entry defines the target `s` directly;
/// the jump density is recovered as `p(x) = s(x) w(x)`.
#[derive(Debug, Clone, Copy)]
pub enum LevyDensity {
    /// s = lambda.
    Constant { lambda: f64 },
    /// s linear from `s_lo` at the left edge to `s_hi` at the right edge.
    LinearRamp { s_lo: f64, s_hi: f64 },
    /// s(x) = scale * exp(-x).
    TruncatedExponential { scale: f64 },
    /// s(x) = peak - slope * |x - mid|, a Lipschitz tent with its kink at
    /// the window midpoint.
    LipschitzKink { peak: f64, slope: f64 },
    /// s(x) = c * |x - x0|^alpha + base, Hölder-alpha smooth at x0.
    Holder {
        alpha: f64,
        c: f64,
        x0: f64,
        base: f64,
    },
    /// p(x) = c / x against the inverse-square measure, so s(x) = c * x.
    InverseSquareCompensated { c: f64 },
}

impl LevyDensity {
    fn validate(&self, window: Window, measure_kind: MeasureKind) -> Result<()> {
        let fail = |msg: String| Err(SieveError::InvalidModel(msg));
        match *self {
            LevyDensity::Constant { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return fail(format!("constant density needs lambda > 0, got {lambda}"));
                }
            }
            LevyDensity::LinearRamp { s_lo, s_hi } => {
                if !(s_lo > 0.0 && s_hi > 0.0) {
                    return fail(format!(
                        "linear ramp needs positive endpoints, got ({s_lo}, {s_hi})"
                    ));
                }
            }
            LevyDensity::TruncatedExponential { scale } => {
                if !(scale > 0.0) {
                    return fail(format!("exponential scale must be positive, got {scale}"));
                }
            }
            LevyDensity::LipschitzKink { peak, slope } => {
                if !(peak > 0.0 && slope >= 0.0) {
                    return fail(format!(
                        "kink density needs peak > 0 and slope >= 0, got ({peak}, {slope})"
                    ));
                }
                if peak - slope * window.len() / 2.0 <= 0.0 {
                    return fail(format!(
                        "kink density not positive: peak {peak} <= slope*len/2 = {}",
                        slope * window.len() / 2.0
                    ));
                }
            }
            LevyDensity::Holder { alpha, c, x0, base } => {
                if !(alpha > 0.0) {
                    return fail(format!("Hölder exponent must be positive, got {alpha}"));
                }
                if !(c > 0.0 && base > 0.0) {
                    return fail(format!(
                        "Hölder density needs c > 0 and base > 0, got ({c}, {base})"
                    ));
                }
                if !(x0 > window.lo && x0 < window.hi) {
                    return fail(format!("Hölder knot x0 = {x0} must lie inside the window"));
                }
            }
            LevyDensity::InverseSquareCompensated { c } => {
                if !(c > 0.0) {
                    return fail(format!("compensated density needs c > 0, got {c}"));
                }
                if measure_kind != MeasureKind::InverseSquare {
                    return fail(
                        "inverse-square-compensated density requires the inverse-square measure"
                            .into(),
                    );
                }
                if window.lo < 0.0 {
                    return fail("inverse-square-compensated density needs a positive window".into());
                }
            }
        }
        Ok(())
    }

    fn eval_s(&self, window: Window, x: f64) -> f64 {
        match *self {
            LevyDensity::Constant { lambda } => lambda,
            LevyDensity::LinearRamp { s_lo, s_hi } => {
                s_lo + (s_hi - s_lo) * (x - window.lo) / window.len()
            }
            LevyDensity::TruncatedExponential { scale } => scale * (-x).exp(),
            LevyDensity::LipschitzKink { peak, slope } => peak - slope * (x - window.mid()).abs(),
            LevyDensity::Holder { alpha, c, x0, base } => c * (x - x0).abs().powf(alpha) + base,
            LevyDensity::InverseSquareCompensated { c } => c * x,
        }
    }

    /// Points where `s` is only piecewise smooth, with a singular flag for
    /// non-polynomial power laws.
    fn breakpoints(&self, window: Window) -> Vec<Breakpoint> {
        match *self {
            LevyDensity::LipschitzKink { .. } => vec![Breakpoint::kink(window.mid())],
            LevyDensity::Holder { alpha, x0, .. } => {
                // integer alpha keeps one-sided pieces polynomial
                if alpha.fract() == 0.0 {
                    vec![Breakpoint::kink(x0)]
                } else {
                    vec![Breakpoint::singular(x0)]
                }
            }
            _ => Vec::new(),
        }
    }

    /// Declared smoothness for rate experiments; infinity for entries that
    /// are smooth (or already polynomial) on the window.
    fn smoothness(&self) -> f64 {
        match *self {
            LevyDensity::LipschitzKink { .. } => 1.0,
            LevyDensity::Holder { alpha, .. } => alpha,
            _ => f64::INFINITY,
        }
    }

    /// Closed-form (rho, ||s||_eta^2, sup s) when elementary for the given
    /// measure kind.
    fn closed_forms(&self, window: Window, kind: MeasureKind) -> Option<ModelConstants> {
        let w = window;
        let len = w.len();
        match (*self, kind) {
            (LevyDensity::Constant { lambda }, MeasureKind::Lebesgue) => Some(ModelConstants {
                rho: lambda * len,
                s_l2_sq: lambda * lambda * len,
                s_sup: lambda,
            }),
            (LevyDensity::Constant { lambda }, MeasureKind::InverseSquare) => {
                let mass = inv_sq_mass(w);
                Some(ModelConstants {
                    rho: lambda * mass,
                    s_l2_sq: lambda * lambda * mass,
                    s_sup: lambda,
                })
            }
            (LevyDensity::LinearRamp { s_lo, s_hi }, MeasureKind::Lebesgue) => Some(ModelConstants {
                rho: 0.5 * len * (s_lo + s_hi),
                s_l2_sq: len * (s_lo * s_lo + s_lo * s_hi + s_hi * s_hi) / 3.0,
                s_sup: s_lo.max(s_hi),
            }),
            (LevyDensity::LinearRamp { s_lo, s_hi }, MeasureKind::InverseSquare) => {
                // s = c0 + c1 x; integrals of (c0 + c1 x)^j x^-2 are elementary
                let c1 = (s_hi - s_lo) / len;
                let c0 = s_lo - c1 * w.lo;
                let mass = inv_sq_mass(w);
                let log_ratio = (w.hi / w.lo).ln();
                Some(ModelConstants {
                    rho: c0 * mass + c1 * log_ratio,
                    s_l2_sq: c0 * c0 * mass + 2.0 * c0 * c1 * log_ratio + c1 * c1 * len,
                    s_sup: s_lo.max(s_hi),
                })
            }
            (LevyDensity::TruncatedExponential { scale }, MeasureKind::Lebesgue) => {
                Some(ModelConstants {
                    rho: scale * ((-w.lo).exp() - (-w.hi).exp()),
                    s_l2_sq: scale * scale * 0.5 * ((-2.0 * w.lo).exp() - (-2.0 * w.hi).exp()),
                    s_sup: scale * (-w.lo).exp(),
                })
            }
            (LevyDensity::LipschitzKink { peak, slope }, MeasureKind::Lebesgue) => {
                let h = 0.5 * len;
                Some(ModelConstants {
                    rho: peak * len - slope * h * h,
                    s_l2_sq: peak * peak * len - peak * slope * len * len / 2.0
                        + slope * slope * len * len * len / 12.0,
                    s_sup: peak,
                })
            }
            (LevyDensity::Holder { alpha, c, x0, base }, MeasureKind::Lebesgue) => {
                let r = w.hi - x0;
                let l = x0 - w.lo;
                let p1 = (r.powf(alpha + 1.0) + l.powf(alpha + 1.0)) / (alpha + 1.0);
                let p2 = (r.powf(2.0 * alpha + 1.0) + l.powf(2.0 * alpha + 1.0))
                    / (2.0 * alpha + 1.0);
                Some(ModelConstants {
                    rho: c * p1 + base * len,
                    s_l2_sq: c * c * p2 + 2.0 * c * base * p1 + base * base * len,
                    s_sup: c * r.max(l).powf(alpha) + base,
                })
            }
            (LevyDensity::InverseSquareCompensated { c }, MeasureKind::InverseSquare) => {
                Some(ModelConstants {
                    rho: c * (w.hi / w.lo).ln(),
                    s_l2_sq: c * c * len,
                    s_sup: c * w.hi,
                })
            }
            _ => None,
        }
    }
}

fn inv_sq_mass(w: Window) -> f64 {
    // int_lo^hi x^-2 dx, valid for windows on either side of the origin
    1.0 / w.lo - 1.0 / w.hi
}

/// Exact model constants: jump rate on the window, squared eta-norm of `s`,
/// and sup of `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    /// rho = int_D s d(eta) = nu(D), the expected jumps per unit time.
    pub rho: f64,
    /// int_D s^2 d(eta).
    pub s_l2_sq: f64,
    /// sup over D of s.
    pub s_sup: f64,
}

/// A ground-truth model: target density, reference measure, and the
/// diffusion parameters used by the discrete-observation experiments.
#[derive(Debug, Clone)]
pub struct LevyModel {
    name: String,
    density: LevyDensity,
    measure: ReferenceMeasure,
    sigma: f64,
    drift: f64,
    alpha: f64,
    closed: Option<ModelConstants>,
    rho: f64,
}

impl LevyModel {
    pub fn new(
        name: impl Into<String>,
        density: LevyDensity,
        measure: ReferenceMeasure,
        sigma: f64,
        drift: f64,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite() && drift.is_finite()) {
            return Err(SieveError::InvalidModel(format!(
                "need sigma >= 0 and finite drift, got ({sigma}, {drift})"
            )));
        }
        let window = measure.window();
        density.validate(window, measure.kind())?;
        let closed = density.closed_forms(window, measure.kind());
        let alpha = density.smoothness();
        let rho = match closed {
            Some(c) => c.rho,
            None => {
                let breaks = density.breakpoints(window);
                eta_integral_with_breakpoints(
                    |x| density.eval_s(window, x),
                    &measure,
                    DEFAULT_ORDER,
                    &breaks,
                )?
            }
        };
        if !(rho.is_finite() && rho > 0.0) {
            return Err(SieveError::InvalidModel(format!(
                "jump rate on the window must be positive and finite, got {rho}"
            )));
        }
        Ok(LevyModel {
            name: name.into(),
            density,
            measure,
            sigma,
            drift,
            alpha,
            closed,
            rho,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn measure(&self) -> &ReferenceMeasure {
        &self.measure
    }

    pub fn window(&self) -> Window {
        self.measure.window()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Declared smoothness of `s` (infinite for smooth catalog entries).
    pub fn smoothness_alpha(&self) -> f64 {
        self.alpha
    }

    /// Target density s = dnu/deta at x.
    pub fn s(&self, x: f64) -> f64 {
        self.density.eval_s(self.window(), x)
    }

    /// Jump density p(x) = s(x) w(x) against Lebesgue measure.
    pub fn p(&self, x: f64) -> f64 {
        self.s(x) * self.measure.weight(x)
    }

    /// Expected number of jumps per unit time with sizes in the window.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub(crate) fn density(&self) -> &LevyDensity {
        &self.density
    }

    /// Breakpoints of `s` inside the window.
    pub(crate) fn s_breakpoints(&self) -> Vec<Breakpoint> {
        self.density.breakpoints(self.window())
    }

    /// Breakpoints of the jump density `p = s * w` (adds the measure's).
    pub(crate) fn p_breakpoints(&self) -> Vec<Breakpoint> {
        let mut b = self.s_breakpoints();
        b.extend(self.measure.breakpoints());
        b
    }

    /// Integrate `f` against eta over the window with the model's
    /// breakpoints folded in.
    pub fn eta_integral_of<F: Fn(f64) -> f64>(&self, f: F, order: usize) -> Result<f64> {
        eta_integral_with_breakpoints(f, &self.measure, order, &self.s_breakpoints())
    }

    /// (rho, sup s, ||s||^2): closed form when the catalog provides it,
    /// quadrature plus a dense-grid sup otherwise.
    pub fn constants(&self) -> Result<ModelConstants> {
        if let Some(c) = self.closed {
            return Ok(c);
        }
        let l2 = self.eta_integral_of(|x| self.s(x) * self.s(x), DEFAULT_ORDER)?;
        Ok(ModelConstants {
            rho: self.rho,
            s_l2_sq: l2,
            s_sup: self.dense_sup(|x| self.s(x)),
        })
    }

    /// Sup over a dense grid (1e5 points) plus endpoints and breakpoints.
    pub(crate) fn dense_sup<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let w = self.window();
        let n = 100_000;
        let mut sup = f(w.lo).max(f(w.hi));
        for b in self.s_breakpoints() {
            sup = sup.max(f(b.x));
        }
        for i in 1..n {
            let x = w.lo + w.len() * i as f64 / n as f64;
            sup = sup.max(f(x));
        }
        sup
    }
}

/// Whole-window model constants; see [`LevyModel::constants`].
pub fn model_constants(model: &LevyModel) -> Result<ModelConstants> {
    model.constants()
}

/// Catalog constructors and the string-id dispatcher used by the CLI.
pub mod catalog {
    use super::*;

    pub fn constant(lambda: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "constant",
            LevyDensity::Constant { lambda },
            ReferenceMeasure::lebesgue(window),
            0.0,
            0.0,
        )
    }

    pub fn linear_ramp(s_lo: f64, s_hi: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "linear-ramp",
            LevyDensity::LinearRamp { s_lo, s_hi },
            ReferenceMeasure::lebesgue(window),
            0.0,
            0.0,
        )
    }

    pub fn truncated_exponential(scale: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "truncated-exponential",
            LevyDensity::TruncatedExponential { scale },
            ReferenceMeasure::lebesgue(window),
            0.0,
            0.0,
        )
    }

    pub fn lipschitz_kink(peak: f64, slope: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "lipschitz-kink",
            LevyDensity::LipschitzKink { peak, slope },
            ReferenceMeasure::lebesgue(window),
            0.0,
            0.0,
        )
    }

    pub fn holder(alpha: f64, c: f64, x0: f64, base: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "holder",
            LevyDensity::Holder { alpha, c, x0, base },
            ReferenceMeasure::lebesgue(window),
            0.0,
            0.0,
        )
    }

    pub fn inverse_square_compensated(c: f64, window: Window) -> Result<LevyModel> {
        LevyModel::new(
            "inverse-square-compensated",
            LevyDensity::InverseSquareCompensated { c },
            ReferenceMeasure::inverse_square(window)?,
            0.0,
            0.0,
        )
    }

    /// Build a model from a string id and a parameter map (CLI surface).
    /// `sigma` and `drift` ride along for the discrete experiments.
    pub fn from_id(
        id: &str,
        params: &BTreeMap<String, f64>,
        window: Window,
        measure: ReferenceMeasure,
        sigma: f64,
        drift: f64,
    ) -> Result<LevyModel> {
        let get = |key: &str| -> Result<f64> {
            params
                .get(key)
                .copied()
                .ok_or_else(|| SieveError::Config(format!("missing key model.{key} for model {id}")))
        };
        let density = match id {
            "constant" => LevyDensity::Constant { lambda: get("lambda")? },
            "linear-ramp" => LevyDensity::LinearRamp {
                s_lo: get("s_lo")?,
                s_hi: get("s_hi")?,
            },
            "truncated-exponential" => LevyDensity::TruncatedExponential { scale: get("scale")? },
            "lipschitz-kink" => LevyDensity::LipschitzKink {
                peak: get("peak")?,
                slope: get("slope")?,
            },
            "holder" => LevyDensity::Holder {
                alpha: get("alpha")?,
                c: get("c")?,
                x0: params.get("x0").copied().unwrap_or(window.mid()),
                base: get("base")?,
            },
            "inverse-square-compensated" => LevyDensity::InverseSquareCompensated { c: get("c")? },
            other => {
                return Err(SieveError::Config(format!(
                    "unknown model.name `{other}`; valid: constant, linear-ramp, \
                     truncated-exponential, lipschitz-kink, holder, inverse-square-compensated"
                )))
            }
        };
        LevyModel::new(id, density, measure, sigma, drift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_catalog() -> Vec<LevyModel> {
        let unit = Window::new(0.0, 1.0).unwrap();
        let shifted = Window::new(0.1, 1.1).unwrap();
        let off = Window::new(1.0, 2.0).unwrap();
        vec![
            catalog::constant(10.0, unit).unwrap(),
            catalog::linear_ramp(2.0, 6.0, unit).unwrap(),
            catalog::truncated_exponential(5.0, shifted).unwrap(),
            catalog::lipschitz_kink(10.0, 8.0, unit).unwrap(),
            catalog::holder(0.5, 4.0, 0.5, 1.0, unit).unwrap(),
            catalog::inverse_square_compensated(1.0, off).unwrap(),
            LevyModel::new(
                "constant-invsq",
                LevyDensity::Constant { lambda: 3.0 },
                ReferenceMeasure::inverse_square(off).unwrap(),
                0.0,
                0.0,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn eta_integral_of_one_is_window_length() {
        let m = ReferenceMeasure::lebesgue(Window::new(0.1, 1.1).unwrap());
        let v = eta_integral(|_| 1.0, &m, 10).unwrap();
        assert!((v - 1.0).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn eta_integral_identity_against_inverse_square_is_log() {
        // int_1^2 x * x^-2 dx = ln 2; cross-checked by doubling the order
        let m = ReferenceMeasure::inverse_square(Window::new(1.0, 2.0).unwrap()).unwrap();
        let v = eta_integral(|x| x, &m, 10).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-13, "got {v}");
        let v2 = eta_integral(|x| x, &m, 20).unwrap();
        assert!((v - v2).abs() < 1e-13);
    }

    #[test]
    fn eta_integral_of_s_recovers_rho_for_catalog() {
        for model in test_catalog() {
            let c = model.constants().unwrap();
            let v = model.eta_integral_of(|x| model.s(x), 10).unwrap();
            assert!(
                ((v - c.rho) / c.rho).abs() < 1e-10,
                "{}: quadrature {v} vs closed form {}",
                model.name(),
                c.rho
            );
        }
    }

    #[test]
    fn eta_integral_of_s_squared_matches_closed_form() {
        for model in test_catalog() {
            let c = model.constants().unwrap();
            let v = model
                .eta_integral_of(|x| model.s(x) * model.s(x), 10)
                .unwrap();
            assert!(
                ((v - c.s_l2_sq) / c.s_l2_sq).abs() < 1e-10,
                "{}: {v} vs {}",
                model.name(),
                c.s_l2_sq
            );
        }
    }

    #[test]
    fn doubling_order_is_a_stable_refinement() {
        for model in test_catalog() {
            let a = model
                .eta_integral_of(|x| model.s(x) * model.s(x), 10)
                .unwrap();
            let b = model
                .eta_integral_of(|x| model.s(x) * model.s(x), 20)
                .unwrap();
            assert!(((a - b) / b).abs() < 1e-8, "{}: {a} vs {b}", model.name());
        }
    }

    #[test]
    fn eta_integral_is_linear() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(314);
        let m = ReferenceMeasure::inverse_square(Window::new(0.5, 2.5).unwrap()).unwrap();
        for _ in 0..50 {
            let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let f = |x: f64| x * x - 1.0;
            let g = |x: f64| (1.5 * x).sin();
            let lhs = eta_integral(|x| a * f(x) + b * g(x), &m, 10).unwrap();
            let rhs = a * eta_integral(f, &m, 10).unwrap() + b * eta_integral(g, &m, 10).unwrap();
            let scale = (a.abs() + b.abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn constant_model_constants_are_exact() {
        let m = catalog::constant(10.0, Window::new(0.0, 1.0).unwrap()).unwrap();
        let c = m.constants().unwrap();
        assert_eq!(c.rho, 10.0);
        assert_eq!(c.s_sup, 10.0);
        assert_eq!(c.s_l2_sq, 100.0);
    }

    #[test]
    fn compensated_model_rho_is_log_two() {
        let m = catalog::inverse_square_compensated(1.0, Window::new(1.0, 2.0).unwrap()).unwrap();
        assert!((m.constants().unwrap().rho - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_constant_is_rejected() {
        let err = catalog::constant(0.0, Window::new(0.0, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, SieveError::InvalidModel(_)));
    }

    #[test]
    fn window_containing_origin_is_rejected() {
        assert!(Window::new(-0.5, 0.5).is_err());
        assert!(Window::new(-2.0, -1.0).is_ok());
    }

    #[test]
    fn inverse_square_measure_needs_window_away_from_zero() {
        let w = Window::new(0.0, 1.0).unwrap();
        assert!(ReferenceMeasure::inverse_square(w).is_err());
        let w = Window::new(-1.0, -0.25).unwrap();
        assert!(ReferenceMeasure::inverse_square(w).is_ok());
    }

    #[test]
    fn non_closed_form_combination_falls_back_to_quadrature() {
        // exponential density against inverse-square weight has no
        // elementary closed form; constants must still be consistent
        let m = LevyModel::new(
            "exp-invsq",
            LevyDensity::TruncatedExponential { scale: 2.0 },
            ReferenceMeasure::inverse_square(Window::new(0.5, 1.5).unwrap()).unwrap(),
            0.0,
            0.0,
        )
        .unwrap();
        let c = m.constants().unwrap();
        let rho_q = m.eta_integral_of(|x| m.s(x), 16).unwrap();
        assert!(((c.rho - rho_q) / rho_q).abs() < 1e-10);
        assert!((c.s_sup - 2.0 * (-0.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn custom_grid_weight_interpolates() {
        let w = Window::new(0.0, 1.0).unwrap();
        let m = ReferenceMeasure::custom_grid(w, vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!((m.weight(0.25) - 1.5).abs() < 1e-15);
        // eta(D) = 2 * (avg of trapezoids) = 1.5
        let v = eta_integral(|_| 1.0, &m, 10).unwrap();
        assert!((v - 1.5).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn catalog_from_id_round_trips() {
        let mut params = BTreeMap::new();
        params.insert("lambda".to_string(), 10.0);
        let w = Window::new(0.0, 1.0).unwrap();
        let m = catalog::from_id("constant", &params, w, ReferenceMeasure::lebesgue(w), 0.0, 0.0)
            .unwrap();
        assert_eq!(m.rho(), 10.0);
        let err =
            catalog::from_id("nope", &params, w, ReferenceMeasure::lebesgue(w), 0.0, 0.0)
                .unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
