//! Composite Gauss-Legendre quadrature.
//!
//! All weighted integrals in the crate go through this module: a reusable
//! Gauss-Legendre rule on [-1, 1], panel generators (equal-width or
//! geometric), and breakpoint handling. Panels never straddle a breakpoint;
//! panels adjacent to a breakpoint marked `singular` are refined
//! geometrically into it so that power-law integrands like |x - x0|^alpha
//! integrate to near machine precision.

use crate::error::{Result, SieveError};

/// Default nodes per panel. Exact per panel for polynomial integrands of
/// degree <= 19, which covers products of two degree-5 basis polynomials
/// against polynomial weights.
pub const DEFAULT_ORDER: usize = 10;

/// Default panel count over an estimation window.
pub const DEFAULT_PANELS: usize = 64;

/// Number of geometric refinement levels toward a singular breakpoint.
const SINGULAR_LEVELS: usize = 30;

/// A point where the integrand loses smoothness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub x: f64,
    /// True when derivatives blow up at `x` (e.g. |x - x0|^alpha with
    /// non-integer alpha); plain kinks only need a panel split.
    pub singular: bool,
}

impl Breakpoint {
    pub fn kink(x: f64) -> Self {
        Breakpoint { x, singular: false }
    }

    pub fn singular(x: f64) -> Self {
        Breakpoint { x, singular: true }
    }
}

/// Gauss-Legendre rule of a given order on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(SieveError::Quadrature(format!(
                "order must be >= 2, got {order}"
            )));
        }
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order;
        // Newton iteration on P_n with the three-term recurrence.
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over a single panel [lo, hi].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        acc * half
    }

    /// Scaled nodes and weights on [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Split [lo, hi] into `n` panels. Geometric spacing grades panel widths
/// toward the endpoint closest to zero, which keeps Gauss-Legendre accurate
/// against weights like x^-2 on windows such as [1e-3, 1].
pub fn panels(lo: f64, hi: f64, n: usize, geometric: bool) -> Vec<(f64, f64)> {
    assert!(lo < hi && n >= 1);
    if !geometric || lo <= 0.0 && hi >= 0.0 {
        return equal_panels(lo, hi, n);
    }
    // Work with magnitudes; for negative windows grade toward `hi`.
    let (a, b, flip) = if lo > 0.0 {
        (lo, hi, false)
    } else {
        (-hi, -lo, true)
    };
    if a <= 0.0 {
        return equal_panels(lo, hi, n);
    }
    let ratio = (b / a).powf(1.0 / n as f64);
    if !(ratio.is_finite()) || ratio <= 1.0 + 1e-12 {
        return equal_panels(lo, hi, n);
    }
    let mut edges = Vec::with_capacity(n + 1);
    for i in 0..=n {
        edges.push(a * ratio.powi(i as i32));
    }
    edges[0] = a;
    edges[n] = b;
    let mut out: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    if flip {
        out = out.into_iter().rev().map(|(l, h)| (-h, -l)).collect();
    }
    out
}

fn equal_panels(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let w = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let a = lo + i as f64 * w;
            let b = if i + 1 == n { hi } else { lo + (i + 1) as f64 * w };
            (a, b)
        })
        .collect()
}

/// Split a panel list at the given breakpoints and geometrically refine
/// panels that end on a singular breakpoint.
pub fn split_at_breakpoints(base: Vec<(f64, f64)>, breaks: &[Breakpoint]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(base.len() + 4 * breaks.len());
    for (lo, hi) in base {
        let mut cuts: Vec<&Breakpoint> = breaks
            .iter()
            .filter(|b| b.x > lo && b.x < hi)
            .collect();
        cuts.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut left = lo;
        for b in &cuts {
            push_panel(&mut out, left, b.x, edge_singularity(left, b.x, breaks));
            left = b.x;
        }
        push_panel(&mut out, left, hi, edge_singularity(left, hi, breaks));
    }
    out
}

/// Which end of (lo, hi) touches a singular breakpoint, if any.
fn edge_singularity(lo: f64, hi: f64, breaks: &[Breakpoint]) -> (bool, bool) {
    let mut at_lo = false;
    let mut at_hi = false;
    for b in breaks {
        if b.singular {
            if b.x == lo {
                at_lo = true;
            }
            if b.x == hi {
                at_hi = true;
            }
        }
    }
    (at_lo, at_hi)
}

fn push_panel(out: &mut Vec<(f64, f64)>, lo: f64, hi: f64, singular_ends: (bool, bool)) {
    if hi <= lo {
        return;
    }
    match singular_ends {
        (false, false) => out.push((lo, hi)),
        (true, false) => grade_into(out, lo, hi, true),
        (false, true) => grade_into(out, lo, hi, false),
        (true, true) => {
            let mid = 0.5 * (lo + hi);
            grade_into(out, lo, mid, true);
            grade_into(out, mid, hi, false);
        }
    }
}

/// Geometric panels accumulating toward `lo` (when `toward_lo`) or `hi`.
fn grade_into(out: &mut Vec<(f64, f64)>, lo: f64, hi: f64, toward_lo: bool) {
    let len = hi - lo;
    let mut frac = 1.0;
    let mut segs = Vec::with_capacity(SINGULAR_LEVELS + 1);
    for _ in 0..SINGULAR_LEVELS {
        frac *= 0.5;
        segs.push(frac);
    }
    // segs: 1/2, 1/4, ... smallest last; innermost sliver kept as one panel.
    if toward_lo {
        let mut left = lo;
        for &f in segs.iter().rev() {
            let right = lo + f * len;
            if right > left {
                out.push((left, right));
                left = right;
            }
        }
        if hi > left {
            out.push((left, hi));
        }
    } else {
        let mut right = hi;
        let mut stack = Vec::new();
        for &f in segs.iter().rev() {
            let left = hi - f * len;
            if left < right {
                stack.push((left, right));
                right = left;
            }
        }
        if right > lo {
            stack.push((lo, right));
        }
        out.extend(stack.into_iter().rev());
    }
}

/// Composite integral of `f` over panels, failing on non-finite values.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    panel_list: &[(f64, f64)],
    mut f: F,
) -> Result<f64> {
    let mut acc = 0.0;
    for &(lo, hi) in panel_list {
        for (x, w) in rule.mapped(lo, hi) {
            let v = f(x);
            if !v.is_finite() {
                return Err(SieveError::Evaluation {
                    node: x,
                    detail: format!("value {v} inside panel [{lo}, {hi}]"),
                });
            }
            acc += w * v;
        }
    }
    Ok(acc)
}
