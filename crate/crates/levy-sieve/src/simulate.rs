//! Exact simulation of the jump measure on [0, T] x D and of discretely
//! observed path increments.
//!
//! The restricted jump measure is a Poisson point process with mean
//! measure dt s(x) eta(dx): the number of jumps is Poisson(T rho), times
//! are i.i.d. uniform on (0, T], and sizes are i.i.d. with density
//! p(x) / rho on D. Sizes are drawn by inverse CDF whenever the catalog
//! density admits one and by rejection against a piecewise-constant
//! envelope otherwise, so samples are exact either way.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Result, SieveError};
use crate::model::{LevyDensity, LevyModel, MeasureKind, Window};

/// Reproducible stream handle: a base seed plus a stream id. Identical
/// (seed, stream) pairs reproduce identical draws bit for bit; Monte Carlo
/// replication r conventionally uses stream id r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// One jump of the path: time in (0, T], size in the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// A realized point pattern of the jump measure on [0, T] x D, sorted by
/// time.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSample {
    horizon: f64,
    jumps: Vec<Jump>,
}

impl JumpSample {
    /// Build from raw jumps; sorts by time and validates sizes.
    pub fn new(horizon: f64, mut jumps: Vec<Jump>, window: Window) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(SieveError::InvalidModel(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        for j in &jumps {
            if !(j.time > 0.0 && j.time <= horizon) {
                return Err(SieveError::InvalidModel(format!(
                    "jump time {} outside (0, {horizon}]",
                    j.time
                )));
            }
            if !window.contains(j.size) {
                return Err(SieveError::OutsideWindow {
                    x: j.size,
                    lo: window.lo,
                    hi: window.hi,
                });
            }
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(JumpSample { horizon, jumps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Number of points, i.e. the jump count prior to T with sizes in D.
    pub fn count(&self) -> usize {
        self.jumps.len()
    }

    pub fn total_size(&self) -> f64 {
        self.jumps.iter().map(|j| j.size).sum()
    }

    /// Superpose two samples over the same horizon.
    pub fn merge(&self, other: &JumpSample) -> Result<JumpSample> {
        if self.horizon != other.horizon {
            return Err(SieveError::InvalidModel(format!(
                "cannot merge samples with horizons {} and {}",
                self.horizon, other.horizon
            )));
        }
        let mut jumps = self.jumps.clone();
        jumps.extend_from_slice(&other.jumps);
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(JumpSample {
            horizon: self.horizon,
            jumps,
        })
    }
}

/// Equally spaced path increments over [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    horizon: f64,
    values: Vec<f64>,
}

impl IncrementSample {
    /// Wrap a raw increment vector (fixtures and synthetic tests).
    #[cfg(test)]
    pub(crate) fn from_raw(horizon: f64, values: Vec<f64>) -> Self {
        assert!(horizon > 0.0 && !values.is_empty());
        IncrementSample { horizon, values }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Time span of one increment, h = T / n.
    pub fn step(&self) -> f64 {
        self.horizon / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Draw a jump sample from the model's restricted jump measure.
pub fn sample_jumps(model: &LevyModel, horizon: f64, stream: &RngStream) -> Result<JumpSample> {
    let mut rng = stream.rng();
    sample_jumps_with(model, horizon, &mut rng)
}

fn sample_jumps_with(model: &LevyModel, horizon: f64, rng: &mut ChaCha8Rng) -> Result<JumpSample> {
    if !(horizon > 0.0) {
        return Err(SieveError::InvalidModel(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let mean = horizon * model.rho();
    let count = Poisson::new(mean)
        .map_err(|e| SieveError::InvalidModel(format!("Poisson({mean}): {e}")))?
        .sample(rng) as u64;
    let sampler = SizeSampler::for_model(model)?;
    let mut jumps = Vec::with_capacity(count as usize);
    for _ in 0..count {
        // map [0,1) to (0,T] so no jump lands exactly at time 0
        let time = horizon * (1.0 - rng.random::<f64>());
        let size = sampler.draw(model, rng)?;
        jumps.push(Jump { time, size });
    }
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(JumpSample {
        horizon,
        jumps,
    })
}

/// Simulate X(t) = drift t + sigma B(t) + sum of jumps exactly on an
/// n-point grid; the underlying jump sample is returned for paired
/// comparisons. Jump times land in half-open cells ((k-1)h, kh].
pub fn sample_increments(
    model: &LevyModel,
    horizon: f64,
    n: usize,
    stream: &RngStream,
) -> Result<(IncrementSample, JumpSample)> {
    if n == 0 {
        return Err(SieveError::InvalidModel("need n >= 1 increments".into()));
    }
    let mut rng = stream.rng();
    let jumps = sample_jumps_with(model, horizon, &mut rng)?;
    let mut incr = increments_from_jumps(&jumps, n, model.drift());
    let sigma = model.sigma();
    if sigma > 0.0 {
        let h = horizon / n as f64;
        let gauss = Normal::new(0.0, sigma * h.sqrt()).expect("finite std dev");
        for v in &mut incr.values {
            *v += gauss.sample(&mut rng);
        }
    }
    Ok((incr, jumps))
}

/// Deterministic pure-jump-plus-drift increments from a given jump sample.
pub fn increments_from_jumps(jumps: &JumpSample, n: usize, drift: f64) -> IncrementSample {
    assert!(n >= 1);
    let horizon = jumps.horizon();
    let h = horizon / n as f64;
    let mut values = vec![drift * h; n];
    for j in jumps.jumps() {
        values[time_cell(j.time, h, n)] += j.size;
    }
    IncrementSample { horizon, values }
}

/// Cell index for a time in (0, T]: cell k covers ((k-1)h, kh], so a time
/// exactly at kh belongs to cell k.
fn time_cell(t: f64, h: f64, n: usize) -> usize {
    let u = (t / h).ceil() as i64 - 1;
    u.clamp(0, n as i64 - 1) as usize
}

/// Exact sampler for the normalized size density p(x) / rho on the window.
enum SizeSampler {
    /// p piecewise linear: exact inverse CDF segment by segment.
    PiecewiseLinear(PiecewiseLinearCdf),
    /// p = c e^{-x} on [a, b].
    TruncatedExp { lo: f64, hi: f64 },
    /// p proportional to x^{-2} on [a, b], a > 0.
    InverseSquareLaw { lo: f64, hi: f64 },
    /// p proportional to 1/x on [a, b], a > 0.
    LogLaw { lo: f64, hi: f64 },
    /// Rejection against a piecewise-constant envelope of p.
    Envelope(Envelope),
}

impl SizeSampler {
    fn for_model(model: &LevyModel) -> Result<Self> {
        let w = model.window();
        let kind = model.measure().kind();
        match (model.density(), kind) {
            (
                LevyDensity::Constant { .. }
                | LevyDensity::LinearRamp { .. }
                | LevyDensity::LipschitzKink { .. },
                MeasureKind::Lebesgue,
            ) => {
                let mut knots = vec![w.lo];
                knots.extend(model.p_breakpoints().iter().map(|b| b.x));
                knots.push(w.hi);
                Ok(SizeSampler::PiecewiseLinear(PiecewiseLinearCdf::new(
                    &knots,
                    |x| model.p(x),
                )?))
            }
            (LevyDensity::TruncatedExponential { .. }, MeasureKind::Lebesgue) => {
                Ok(SizeSampler::TruncatedExp { lo: w.lo, hi: w.hi })
            }
            (LevyDensity::Constant { .. }, MeasureKind::InverseSquare) if w.lo > 0.0 => {
                Ok(SizeSampler::InverseSquareLaw { lo: w.lo, hi: w.hi })
            }
            (LevyDensity::InverseSquareCompensated { .. }, MeasureKind::InverseSquare) => {
                Ok(SizeSampler::LogLaw { lo: w.lo, hi: w.hi })
            }
            _ => Ok(SizeSampler::Envelope(Envelope::build(model)?)),
        }
    }

    fn draw(&self, model: &LevyModel, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self {
            SizeSampler::PiecewiseLinear(cdf) => Ok(cdf.inverse(rng.random::<f64>())),
            SizeSampler::TruncatedExp { lo, hi } => {
                let (elo, ehi) = ((-lo).exp(), (-hi).exp());
                let u = rng.random::<f64>();
                Ok(-(elo - u * (elo - ehi)).ln())
            }
            SizeSampler::InverseSquareLaw { lo, hi } => {
                let u = rng.random::<f64>();
                Ok(1.0 / (1.0 / lo - u * (1.0 / lo - 1.0 / hi)))
            }
            SizeSampler::LogLaw { lo, hi } => {
                let u = rng.random::<f64>();
                Ok(lo * (hi / lo).powf(u))
            }
            SizeSampler::Envelope(env) => env.draw(|x| model.p(x), rng),
        }
    }
}

/// Inverse CDF of a nonnegative piecewise-linear density given by values at
/// consecutive knots.
struct PiecewiseLinearCdf {
    knots: Vec<f64>,
    density: Vec<f64>,
    cum: Vec<f64>,
}

impl PiecewiseLinearCdf {
    fn new(knots: &[f64], p: impl Fn(f64) -> f64) -> Result<Self> {
        let mut ks: Vec<f64> = knots.to_vec();
        ks.sort_by(|a, b| a.total_cmp(b));
        ks.dedup();
        let density: Vec<f64> = ks.iter().map(|&x| p(x)).collect();
        if !density.iter().all(|&d| d.is_finite() && d >= 0.0) {
            return Err(SieveError::InvalidModel(
                "piecewise-linear density must be finite and nonnegative".into(),
            ));
        }
        let mut cum = vec![0.0];
        for i in 0..ks.len() - 1 {
            let mass = 0.5 * (density[i] + density[i + 1]) * (ks[i + 1] - ks[i]);
            cum.push(cum[i] + mass);
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return Err(SieveError::InvalidModel("density has zero mass".into()));
        }
        for c in &mut cum {
            *c /= total;
        }
        let density = density.iter().map(|d| d / total).collect();
        Ok(PiecewiseLinearCdf {
            knots: ks,
            density,
            cum,
        })
    }

    fn inverse(&self, u: f64) -> f64 {
        let i = match self.cum.partition_point(|&c| c <= u) {
            0 => 0,
            p if p >= self.cum.len() => self.cum.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (d0, d1) = (self.density[i], self.density[i + 1]);
        let rem = u - self.cum[i];
        let w = x1 - x0;
        let slope = (d1 - d0) / w;
        if slope.abs() < 1e-14 * d0.max(d1).max(1e-300) {
            let x = x0 + rem / d0.max(1e-300);
            return x.min(x1);
        }
        // solve d0 t + slope t^2 / 2 = rem for t in [0, w]
        let disc = (d0 * d0 + 2.0 * slope * rem).max(0.0);
        let t = (disc.sqrt() - d0) / slope;
        (x0 + t).clamp(x0, x1)
    }
}

/// Piecewise-constant majorant of the jump density p with exact rejection.
struct Envelope {
    pieces: Vec<(f64, f64, f64)>,
    cum: Vec<f64>,
    total: f64,
}

const ENVELOPE_PIECES: usize = 256;
const ENVELOPE_PROBES: usize = 16;
const ENVELOPE_PAD: f64 = 1.0 + 1e-6;

impl Envelope {
    fn build(model: &LevyModel) -> Result<Self> {
        let w = model.window();
        let mut edges = vec![w.lo];
        for b in model.p_breakpoints() {
            if b.x > w.lo && b.x < w.hi {
                edges.push(b.x);
            }
        }
        edges.push(w.hi);
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup();

        let mut pieces = Vec::with_capacity(ENVELOPE_PIECES + edges.len());
        for seg in edges.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let count = ((hi - lo) / w.len() * ENVELOPE_PIECES as f64).ceil().max(1.0) as usize;
            for i in 0..count {
                let a = lo + (hi - lo) * i as f64 / count as f64;
                let b = lo + (hi - lo) * (i + 1) as f64 / count as f64;
                let mut bound: f64 = 0.0;
                for j in 0..=ENVELOPE_PROBES {
                    let x = a + (b - a) * j as f64 / ENVELOPE_PROBES as f64;
                    let v = model.p(x);
                    if !v.is_finite() {
                        return Err(SieveError::InvalidModel(format!(
                            "jump density not bounded at x = {x}"
                        )));
                    }
                    bound = bound.max(v);
                }
                pieces.push((a, b, bound * ENVELOPE_PAD));
            }
        }
        let mut cum = vec![0.0];
        for &(a, b, bound) in &pieces {
            cum.push(cum.last().unwrap() + bound * (b - a));
        }
        let total = *cum.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(SieveError::InvalidModel(
                "envelope has zero or non-finite mass".into(),
            ));
        }
        Ok(Envelope { pieces, cum, total })
    }

    fn draw(&self, p: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        loop {
            let target = rng.random::<f64>() * self.total;
            let i = self
                .cum
                .partition_point(|&c| c <= target)
                .saturating_sub(1)
                .min(self.pieces.len() - 1);
            let (a, b, bound) = self.pieces[i];
            let x = a + (b - a) * rng.random::<f64>();
            let v = p(x);
            if v > bound {
                return Err(SieveError::EnvelopeViolation {
                    x,
                    density: v,
                    bound,
                });
            }
            if rng.random::<f64>() * bound <= v {
                return Ok(x);
            }
        }
    }
}
