//! Sieve spaces: regular piecewise-polynomial models on the window,
//! orthonormalized against the reference measure.
//!
//! A `LinearModel` with degree k and m partitions carries m(k+1) basis
//! functions, each supported on one cell of the regular partition and
//! stored as polynomial coefficients in the cell-local coordinate
//! t = (2x - lo - hi) / (hi - lo). Cells are half-open on the left,
//! ((edge_{j-1}, edge_j]), with the first cell closed at the window's left
//! endpoint; every point-membership question in the crate uses this one
//! convention.

use crate::error::{Result, SieveError};
use crate::model::{LevyModel, ReferenceMeasure, Window};
use crate::quad::{Breakpoint, GaussLegendre, DEFAULT_ORDER, DEFAULT_PANELS};

/// Highest supported polynomial degree per cell.
pub const MAX_DEGREE: usize = 5;

/// Default number of models per collection.
pub const DEFAULT_M_MAX: usize = 64;

/// Dense-grid resolution per cell for the sup of the squared basis sum.
const SUP_GRID_PER_CELL: usize = 10_000;

/// One sieve space S_m: regular m-cell partition, degree-k polynomials per
/// cell, orthonormal under eta.
#[derive(Debug, Clone)]
pub struct LinearModel {
    degree: usize,
    partitions: usize,
    measure: ReferenceMeasure,
    /// Per cell: k+1 polynomials, each with k+1 coefficients in the local
    /// coordinate.
    cells: Vec<CellBasis>,
    sup_sq: f64,
}

#[derive(Debug, Clone)]
struct CellBasis {
    lo: f64,
    hi: f64,
    /// coef[r][j]: coefficient of t^j in the r-th local basis polynomial.
    coef: Vec<Vec<f64>>,
}

impl CellBasis {
    #[inline]
    fn local(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    #[inline]
    fn eval_poly(&self, r: usize, x: f64) -> f64 {
        let t = self.local(x);
        horner(&self.coef[r], t)
    }

    fn sum_sq(&self, x: f64) -> f64 {
        let t = self.local(x);
        self.coef.iter().map(|c| {
            let v = horner(c, t);
            v * v
        }).sum()
    }
}

#[inline]
fn horner(coef: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coef.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// Build the sieve space with the given degree and partition count.
pub fn build_model(degree: usize, partitions: usize, measure: &ReferenceMeasure) -> Result<LinearModel> {
    LinearModel::build(degree, partitions, measure.clone())
}

impl LinearModel {
    pub fn build(degree: usize, partitions: usize, measure: ReferenceMeasure) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(SieveError::DegreeTooHigh(format!(
                "degree {degree} exceeds supported maximum {MAX_DEGREE}"
            )));
        }
        if partitions == 0 {
            return Err(SieveError::InvalidModel("need at least one partition".into()));
        }
        let window = measure.window();
        let width = window.len() / partitions as f64;
        let rule = GaussLegendre::new(DEFAULT_ORDER)?;
        let mut cells = Vec::with_capacity(partitions);
        for j in 0..partitions {
            let lo = window.lo + j as f64 * width;
            let hi = if j + 1 == partitions { window.hi } else { window.lo + (j + 1) as f64 * width };
            let coef = orthonormal_cell_basis(degree, lo, hi, &measure, &rule)?;
            cells.push(CellBasis { lo, hi, coef });
        }
        let mut model = LinearModel {
            degree,
            partitions,
            measure,
            cells,
            sup_sq: 0.0,
        };
        model.sup_sq = model.dense_sup_of_sum_sq();
        Ok(model)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Partition count m.
    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn window(&self) -> Window {
        self.measure.window()
    }

    pub fn measure(&self) -> &ReferenceMeasure {
        &self.measure
    }

    /// Dimension d_m = m (k+1).
    pub fn dim(&self) -> usize {
        self.partitions * (self.degree + 1)
    }

    /// Sup-norm constant D_m = || sum_i phi_i^2 ||_inf.
    pub fn sup_sq(&self) -> f64 {
        self.sup_sq
    }

    /// Cell index for x under the half-open convention.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let w = self.window();
        let u = ((x - w.lo) / w.len() * self.partitions as f64).ceil() as i64 - 1;
        u.clamp(0, self.partitions as i64 - 1) as usize
    }

    /// Evaluate basis function i (0-based) at a point of the window.
    pub fn eval_basis(&self, i: usize, x: f64) -> Result<f64> {
        let w = self.window();
        if !w.contains(x) {
            return Err(SieveError::OutsideWindow { x, lo: w.lo, hi: w.hi });
        }
        assert!(i < self.dim(), "basis index {i} out of range");
        let per = self.degree + 1;
        let (cell, r) = (i / per, i % per);
        if self.cell_of(x) != cell {
            return Ok(0.0);
        }
        Ok(self.cells[cell].eval_poly(r, x))
    }

    /// Sum of squared basis functions at x (x must lie in the window).
    pub fn sum_squares(&self, x: f64) -> f64 {
        self.cells[self.cell_of(x)].sum_sq(x)
    }

    /// Evaluate all k+1 basis polynomials living on x's cell; `out` gets
    /// (global index, value) pairs. Hot path for fitting.
    #[inline]
    pub(crate) fn eval_cell_basis(&self, x: f64, out: &mut [f64]) -> usize {
        let cell = self.cell_of(x);
        let cb = &self.cells[cell];
        let t = cb.local(x);
        for (r, c) in cb.coef.iter().enumerate() {
            out[r] = horner(c, t);
        }
        cell * (self.degree + 1)
    }

    fn dense_sup_of_sum_sq(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for cb in &self.cells {
            let n = SUP_GRID_PER_CELL;
            for i in 0..=n {
                let x = cb.lo + (cb.hi - cb.lo) * i as f64 / n as f64;
                sup = sup.max(cb.sum_sq(x));
            }
        }
        sup
    }

    /// Quadrature nodes (x, eta-weight) per cell, with panel splits at the
    /// supplied breakpoints of the integrand. The panel budget per cell
    /// shrinks as cells multiply so whole-window work stays level.
    pub(crate) fn cell_nodes(&self, breaks: &[Breakpoint], order: usize) -> Result<Vec<Vec<(f64, f64)>>> {
        let rule = GaussLegendre::new(order)?;
        let per_cell = (DEFAULT_PANELS / self.partitions).max(2);
        let mut out = Vec::with_capacity(self.cells.len());
        for cb in &self.cells {
            let grid = self.measure.panel_grid(cb.lo, cb.hi, per_cell, breaks);
            let mut nodes = Vec::with_capacity(grid.len() * order);
            for (lo, hi) in grid {
                for (x, w) in rule.mapped(lo, hi) {
                    nodes.push((x, w * self.measure.weight(x)));
                }
            }
            out.push(nodes);
        }
        Ok(out)
    }

    /// Integrate f against eta cell by cell (cell-aligned panels).
    pub(crate) fn integrate_per_cell<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breaks: &[Breakpoint],
        order: usize,
    ) -> Result<f64> {
        let nodes = self.cell_nodes(breaks, order)?;
        let mut acc = 0.0;
        for cell_nodes in &nodes {
            for &(x, w) in cell_nodes {
                let v = f(x);
                if !v.is_finite() {
                    return Err(SieveError::Evaluation {
                        node: x,
                        detail: "cell integration".into(),
                    });
                }
                acc += w * v;
            }
        }
        Ok(acc)
    }
}

/// Gram-Schmidt on local monomials under the cell-restricted eta inner
/// product, with a second orthogonalization pass for stability.
fn orthonormal_cell_basis(
    degree: usize,
    lo: f64,
    hi: f64,
    measure: &ReferenceMeasure,
    rule: &GaussLegendre,
) -> Result<Vec<Vec<f64>>> {
    // Nodes on this cell; sub-panels keep non-polynomial weights accurate.
    let grid = measure.panel_grid(lo, hi, 8, &[]);
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(grid.len() * rule.order());
    for (a, b) in grid {
        for (x, w) in rule.mapped(a, b) {
            nodes.push((x, w * measure.weight(x)));
        }
    }
    let local = |x: f64| (2.0 * x - lo - hi) / (hi - lo);
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        nodes
            .iter()
            .map(|&(x, w)| {
                let t = local(x);
                w * horner(a, t) * horner(b, t)
            })
            .sum()
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    for r in 0..=degree {
        let mut v = vec![0.0; degree + 1];
        v[r] = 1.0;
        let raw_norm_sq = dot(&v, &v);
        for _pass in 0..2 {
            for b in &basis {
                let proj = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let norm_sq = dot(&v, &v);
        if !(norm_sq > raw_norm_sq * 1e-24) || !norm_sq.is_finite() {
            return Err(SieveError::DegreeTooHigh(format!(
                "Gram matrix numerically singular on cell [{lo}, {hi}] at degree {r}"
            )));
        }
        let inv = 1.0 / norm_sq.sqrt();
        for vi in &mut v {
            *vi *= inv;
        }
        basis.push(v);
    }
    Ok(basis)
}

/// The sieve collection {S_m : m = 1..m_max} at a fixed degree. At most one
/// model per dimension by construction, so the polynomial-complexity count
/// holds with Gamma = 1, R = 0.
#[derive(Debug, Clone)]
pub struct ModelCollection {
    degree: usize,
    models: Vec<LinearModel>,
}

/// Collection constants for a given ground-truth model: beta is the worst
/// ratio of expected empirical mass of the squared basis sum to the
/// sup-norm constant, phi_inf the worst sup-to-dimension ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionConstants {
    pub beta: f64,
    pub phi_inf: f64,
}

impl ModelCollection {
    pub fn build(degree: usize, m_max: usize, measure: &ReferenceMeasure) -> Result<Self> {
        if m_max == 0 {
            return Err(SieveError::InvalidModel("need m_max >= 1".into()));
        }
        let models = (1..=m_max)
            .map(|m| LinearModel::build(degree, m, measure.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelCollection { degree, models })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn models(&self) -> &[LinearModel] {
        &self.models
    }

    pub fn m_max(&self) -> usize {
        self.models.len()
    }

    /// Models admissible at horizon T (sup-norm constant at most T).
    pub fn admissible(&self, t: f64) -> impl Iterator<Item = &LinearModel> {
        self.models.iter().filter(move |m| m.sup_sq() <= t)
    }

    pub fn constants(&self, model: &LevyModel) -> Result<CollectionConstants> {
        let breaks = model.s_breakpoints();
        let mut beta = f64::INFINITY;
        let mut phi_inf = f64::INFINITY;
        for lm in &self.models {
            let expected_vhat =
                lm.integrate_per_cell(|x| lm.sum_squares(x) * model.s(x), &breaks, DEFAULT_ORDER)?;
            beta = beta.min(expected_vhat / lm.sup_sq());
            phi_inf = phi_inf.min(lm.sup_sq() / lm.dim() as f64);
        }
        Ok(CollectionConstants { beta, phi_inf })
    }
}

/// Free-function form of [`LinearModel::sup_sq`].
pub fn sum_squares_sup(model: &LinearModel) -> f64 {
    model.sup_sq()
}
