//! Monte Carlo experiment orchestration: risk sweeps, oracle checks, rate
//! fits, concentration verification, and the config-driven entry point
//! behind the CLI.
//!
//! Replications are independent tasks keyed by stream id; results are
//! collected in replication order and reduced sequentially, so reports do
//! not depend on scheduling.

pub mod config;
mod output;

use rayon::prelude::*;

use crate::bases::ModelCollection;
use crate::discrete::{fit_projection_discrete, integral_stat, ThresholdRule};
use crate::error::{Result, SieveError};
use crate::estimate::{
    fit_and_score, fit_projection, PenaltyConfig, RiskEvaluator,
};
use crate::model::LevyModel;
use crate::simulate::{sample_increments, sample_jumps, RngStream};
use crate::stats;

pub use config::{ExperimentConfig, ExperimentKind};

/// Per-model Monte Carlo risk summary.
#[derive(Debug, Clone)]
pub struct ModelRiskRow {
    pub m: usize,
    pub dim: usize,
    pub sup_sq: f64,
    pub risk_mean: f64,
    pub risk_se: Option<f64>,
    pub bias_sq: f64,
    pub chi_mean: f64,
    pub pen_mean: f64,
    pub select_freq: f64,
}

/// Full risk report over a model collection.
#[derive(Debug, Clone)]
pub struct RiskReport {
    pub rows: Vec<ModelRiskRow>,
    pub excluded: Vec<usize>,
    pub ppe_risk_mean: f64,
    pub ppe_risk_se: Option<f64>,
    /// Partition count minimizing the empirical mean risk.
    pub oracle_m: usize,
    /// Mean p.p.e. risk over the best per-model mean risk.
    pub oracle_ratio: f64,
    pub reps: u64,
}

struct RepOutcome {
    risks: Vec<f64>,
    chis: Vec<f64>,
    pens: Vec<f64>,
    selected: usize,
}

/// Monte Carlo risk estimation: per replication, sample jumps, fit every
/// admissible model, select, and accumulate the error decomposition.
pub fn risk_mc(
    model: &LevyModel,
    coll: &ModelCollection,
    penalty: &PenaltyConfig,
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<RiskReport> {
    let admissible: Vec<_> = coll.admissible(t).collect();
    if admissible.is_empty() {
        let min_sup = coll
            .models()
            .iter()
            .map(|m| m.sup_sq())
            .fold(f64::INFINITY, f64::min);
        return Err(SieveError::HorizonTooSmall { t, min_sup_sq: min_sup });
    }
    let evaluators = admissible
        .iter()
        .map(|lm| RiskEvaluator::new(model, lm))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<RepOutcome> = (1..=reps)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let wrap = |e: SieveError| SieveError::Replication { rep, source: Box::new(e) };
            let jumps = sample_jumps(model, t, &RngStream::new(seed, rep)).map_err(wrap)?;
            let scores = fit_and_score(&jumps, coll, penalty).map_err(wrap)?;
            debug_assert_eq!(scores.entries.len(), evaluators.len());
            let mut risks = Vec::with_capacity(evaluators.len());
            let mut chis = Vec::with_capacity(evaluators.len());
            let mut pens = Vec::with_capacity(evaluators.len());
            for ((row, est), ev) in scores.entries.iter().zip(&evaluators) {
                let err = ev.eval(est).map_err(wrap)?;
                risks.push(err.total);
                chis.push(err.chi_sq);
                pens.push(row.penalty);
            }
            Ok(RepOutcome {
                risks,
                chis,
                pens,
                selected: scores.selected(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_models = evaluators.len();
    let mut rows = Vec::with_capacity(n_models);
    let mut ppe_risks = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        ppe_risks.push(o.risks[o.selected]);
    }
    for (i, lm) in admissible.iter().enumerate() {
        let risks: Vec<f64> = outcomes.iter().map(|o| o.risks[i]).collect();
        let chis: Vec<f64> = outcomes.iter().map(|o| o.chis[i]).collect();
        let pens: Vec<f64> = outcomes.iter().map(|o| o.pens[i]).collect();
        let (risk_mean, risk_se) = stats::mean_se(&risks);
        let hits = outcomes.iter().filter(|o| o.selected == i).count();
        rows.push(ModelRiskRow {
            m: lm.partitions(),
            dim: lm.dim(),
            sup_sq: lm.sup_sq(),
            risk_mean,
            risk_se,
            bias_sq: evaluators[i].bias_sq(),
            chi_mean: stats::mean_se(&chis).0,
            pen_mean: stats::mean_se(&pens).0,
            select_freq: hits as f64 / outcomes.len() as f64,
        });
    }
    let (ppe_risk_mean, ppe_risk_se) = stats::mean_se(&ppe_risks);
    let oracle_idx = (0..n_models)
        .min_by(|&a, &b| rows[a].risk_mean.total_cmp(&rows[b].risk_mean))
        .unwrap();
    let excluded: Vec<usize> = coll
        .models()
        .iter()
        .filter(|m| m.sup_sq() > t)
        .map(|m| m.partitions())
        .collect();
    Ok(RiskReport {
        oracle_m: rows[oracle_idx].m,
        oracle_ratio: ppe_risk_mean / rows[oracle_idx].risk_mean,
        rows,
        excluded,
        ppe_risk_mean,
        ppe_risk_se,
        reps,
    })
}

/// Oracle-inequality check derived from a risk report.
#[derive(Debug, Clone, Copy)]
pub struct OracleCheck {
    pub ratio: f64,
    pub additive_slack: f64,
    pub pass: bool,
}

pub fn oracle_check(report: &RiskReport, t: f64, max_ratio: f64) -> OracleCheck {
    let best = report
        .rows
        .iter()
        .map(|r| r.risk_mean)
        .fold(f64::INFINITY, f64::min);
    let ratio = report.ppe_risk_mean / best;
    OracleCheck {
        ratio,
        additive_slack: (report.ppe_risk_mean - best) * t,
        pass: ratio <= max_ratio,
    }
}

/// One horizon of a rate experiment.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub t: f64,
    pub risk_mean: f64,
    pub risk_se: Option<f64>,
    pub mhat_mean: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of log mean risk against log T.
    pub slope: f64,
    pub intercept: f64,
    /// Whether the fit used only the three largest horizons.
    pub tail3: bool,
}

/// Sweep the horizon grid and fit the log-log risk slope of the p.p.e.
pub fn rate_experiment(
    model: &LevyModel,
    coll: &ModelCollection,
    penalty: &PenaltyConfig,
    t_grid: &[f64],
    reps: u64,
    seed: u64,
    tail3: bool,
) -> Result<RateReport> {
    assert!(t_grid.len() >= 2);
    let mut points = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let admissible: Vec<_> = coll.admissible(t).collect();
        if admissible.is_empty() {
            return Err(SieveError::HorizonTooSmall {
                t,
                min_sup_sq: coll
                    .models()
                    .iter()
                    .map(|m| m.sup_sq())
                    .fold(f64::INFINITY, f64::min),
            });
        }
        let evaluators = admissible
            .iter()
            .map(|lm| RiskEvaluator::new(model, lm))
            .collect::<Result<Vec<_>>>()?;
        let per_rep: Vec<(f64, usize)> = (1..=reps)
            .into_par_iter()
            .map(|rep| -> Result<(f64, usize)> {
                let stream = RngStream::new(seed, ti as u64 * reps + rep);
                let wrap = |e: SieveError| SieveError::Replication { rep, source: Box::new(e) };
                let jumps = sample_jumps(model, t, &stream).map_err(wrap)?;
                let scores = fit_and_score(&jumps, coll, penalty).map_err(wrap)?;
                let sel = scores.selected();
                let (row, est) = &scores.entries[sel];
                let err = evaluators[sel].eval(est).map_err(wrap)?;
                Ok((err.total, row.m))
            })
            .collect::<Result<Vec<_>>>()?;
        let risks: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
        let (risk_mean, risk_se) = stats::mean_se(&risks);
        if !(risk_mean > 0.0) {
            return Err(SieveError::NumericalConsistency(format!(
                "mean risk at T = {t} is not positive; rate fit is undefined"
            )));
        }
        let mhat_mean =
            per_rep.iter().map(|p| p.1 as f64).sum::<f64>() / per_rep.len() as f64;
        points.push(RatePoint {
            t,
            risk_mean,
            risk_se,
            mhat_mean,
        });
    }
    let fit_points: Vec<&RatePoint> = if tail3 && points.len() > 3 {
        points.iter().skip(points.len() - 3).collect()
    } else {
        points.iter().collect()
    };
    let xs: Vec<f64> = fit_points.iter().map(|p| p.t.ln()).collect();
    let ys: Vec<f64> = fit_points.iter().map(|p| p.risk_mean.ln()).collect();
    let (slope, intercept) = stats::ols_slope(&xs, &ys);
    Ok(RateReport {
        points,
        slope,
        intercept,
        tail3,
    })
}

/// One grid point of a concentration experiment.
#[derive(Debug, Clone)]
pub struct ConcentrationRow {
    pub u: f64,
    /// Upper-deviation threshold sqrt(2 Lambda u) + u/3.
    pub threshold: f64,
    /// Empirical frequency of {N - Lambda >= threshold}.
    pub upper_freq: f64,
    /// Exact Poisson tail of the same event.
    pub upper_exact: f64,
    /// The bound e^{-u}.
    pub bound: f64,
    /// Binomial standard error at the exact tail probability.
    pub binom_se: f64,
    /// Empirical frequency of the lower-bound failure event.
    pub lower_fail_freq: f64,
    /// Exact Poisson probability of the lower-bound failure event.
    pub lower_exact: f64,
}

#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub lambda_total: f64,
    pub epsilon: f64,
    pub rows: Vec<ConcentrationRow>,
    pub reps: u64,
}

/// Draw Poisson masses and compare upper/lower deviation frequencies with
/// their exponential bounds; an exact Poisson-tail oracle (cumulative pmf
/// summation) rides along for every grid point.
pub fn concentration_check(
    lambda: f64,
    t: f64,
    u_grid: &[f64],
    epsilon: f64,
    reps: u64,
    seed: u64,
) -> Result<ConcentrationReport> {
    if !(lambda > 0.0 && t > 0.0) {
        return Err(SieveError::Config(format!(
            "concentration needs lambda > 0 and t > 0, got ({lambda}, {t})"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(SieveError::Config(format!(
            "conc.epsilon must be positive, got {epsilon}"
        )));
    }
    if u_grid.iter().any(|&u| u <= 0.0) {
        return Err(SieveError::Config("u.grid values must be positive".into()));
    }
    let big_lambda = lambda * t;
    use rand_distr::Distribution;
    let pois = rand_distr::Poisson::new(big_lambda)
        .map_err(|e| SieveError::Config(format!("Poisson({big_lambda}): {e}")))?;
    let mut rng = RngStream::new(seed, 0).rng();
    let draws: Vec<f64> = (0..reps).map(|_| pois.sample(&mut rng)).collect();

    let mut rows = Vec::with_capacity(u_grid.len());
    for &u in u_grid {
        let threshold = (2.0 * big_lambda * u).sqrt() + u / 3.0;
        let upper_hits = draws
            .iter()
            .filter(|&&n| n - big_lambda >= threshold)
            .count();
        // exact tail: N >= Lambda + threshold
        let k_min = (big_lambda + threshold).ceil() as i64;
        let upper_exact = stats::poisson_sf(big_lambda, k_min);
        // lower-bound failure: (1+eps)(N + (1/(2eps) + 5/6) u) < Lambda
        let slack = (1.0 / (2.0 * epsilon) + 5.0 / 6.0) * u;
        let cut = big_lambda / (1.0 + epsilon) - slack;
        let lower_hits = draws.iter().filter(|&&n| n < cut).count();
        let k_below = (cut.ceil() - 1.0) as i64;
        let lower_exact = stats::poisson_cdf(big_lambda, k_below);
        rows.push(ConcentrationRow {
            u,
            threshold,
            upper_freq: upper_hits as f64 / reps as f64,
            upper_exact,
            bound: (-u).exp(),
            binom_se: (upper_exact * (1.0 - upper_exact) / reps as f64).sqrt(),
            lower_fail_freq: lower_hits as f64 / reps as f64,
            lower_exact,
        });
    }
    Ok(ConcentrationReport {
        lambda_total: big_lambda,
        epsilon,
        rows,
        reps,
    })
}

/// Closed-form check that a quadratic-tail variable obeys the
/// expectation-from-tail bound: with Z = a E^2 + b E for E ~ Exp(1),
/// P(Z >= a x^2 + b x) = e^{-x} <= K e^{-x}, and E(Z) = 2a + b must not
/// exceed K (2a + b).
#[derive(Debug, Clone, Copy)]
pub struct TailExpectationCheck {
    pub expectation: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn tail_expectation_check(a: f64, b: f64, k: f64) -> Result<TailExpectationCheck> {
    if !(a >= 0.0 && b >= 0.0 && (a > 0.0 || b > 0.0)) {
        return Err(SieveError::Config(format!(
            "need a, b >= 0 and not both zero, got ({a}, {b})"
        )));
    }
    if !(k >= 1.0) {
        return Err(SieveError::Config(format!("need K >= 1, got {k}")));
    }
    let expectation = 2.0 * a + b;
    let bound = k * (2.0 * a + b);
    Ok(TailExpectationCheck {
        expectation,
        bound,
        holds: expectation <= bound * (1.0 + 1e-15),
    })
}

/// Grid verification of the square-root splitting inequality
/// a - sqrt(2ab) - b/3 >= a/(1+eps) - (1/(2eps) + 5/6) b.
#[derive(Debug, Clone)]
pub struct SplitGridCheck {
    pub points: usize,
    pub violations: usize,
    /// Most negative margin lhs - rhs seen (roundoff-level at equality).
    pub worst_margin: f64,
}

pub fn sqrt_split_grid_check(n_a: usize, n_b: usize, max: f64, eps: &[f64]) -> SplitGridCheck {
    let mut points = 0;
    let mut violations = 0;
    let mut worst: f64 = f64::INFINITY;
    for i in 1..=n_a {
        let a = max * i as f64 / n_a as f64;
        for j in 1..=n_b {
            let b = max * j as f64 / n_b as f64;
            for &e in eps {
                let lhs = a - (2.0 * a * b).sqrt() - b / 3.0;
                let rhs = a / (1.0 + e) - (1.0 / (2.0 * e) + 5.0 / 6.0) * b;
                let margin = lhs - rhs;
                points += 1;
                worst = worst.min(margin);
                // the inequality is tight on the AM-GM equality locus, so
                // allow roundoff there
                if margin < -1e-12 * (a.abs() + b.abs()).max(1.0) {
                    violations += 1;
                }
            }
        }
    }
    SplitGridCheck {
        points,
        violations,
        worst_margin: worst,
    }
}

/// Paired discrete-versus-continuous diagnostics on one step grid.
#[derive(Debug, Clone)]
pub struct DiscreteRow {
    pub n: usize,
    pub h: f64,
    /// Mean squared coefficient distance between the discrete and
    /// continuous fits.
    pub paired_dist_mean: f64,
    pub paired_dist_se: Option<f64>,
    /// Mean of the increment statistic for f(x) = x^2.
    pub stat_mean: f64,
    pub stat_se: Option<f64>,
    /// Fraction of jump-free cells whose squared increment beat the
    /// threshold.
    pub nojump_pass_frac: f64,
}

#[derive(Debug, Clone)]
pub struct DiscreteReport {
    pub rows: Vec<DiscreteRow>,
    pub reps: u64,
}

pub fn discrete_experiment(
    model: &LevyModel,
    basis_m: usize,
    basis_k: usize,
    rule: &ThresholdRule,
    n_grid: &[usize],
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<DiscreteReport> {
    let lm = crate::bases::LinearModel::build(basis_k, basis_m, model.measure().clone())?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let per_rep: Vec<(f64, f64, u64, u64)> = (1..=reps)
            .into_par_iter()
            .map(|rep| -> Result<(f64, f64, u64, u64)> {
                let stream = RngStream::new(seed, ni as u64 * reps + rep);
                let wrap = |e: SieveError| SieveError::Replication { rep, source: Box::new(e) };
                let (incr, jumps) = sample_increments(model, t, n, &stream).map_err(wrap)?;
                let disc = fit_projection_discrete(&incr, &lm, rule);
                let cont = fit_projection(&jumps, &lm);
                let dist: f64 = disc
                    .coefficients()
                    .iter()
                    .zip(cont.coefficients())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let stat = integral_stat(&incr, |x| x * x);
                let h = incr.step();
                let thr = rule.threshold(h);
                let mut has_jump = vec![false; n];
                for j in jumps.jumps() {
                    let cell = ((j.time / h).ceil() as usize).clamp(1, n) - 1;
                    has_jump[cell] = true;
                }
                let mut nojump = 0u64;
                let mut passed = 0u64;
                for (k, &dx) in incr.values().iter().enumerate() {
                    if !has_jump[k] {
                        nojump += 1;
                        if dx * dx > thr {
                            passed += 1;
                        }
                    }
                }
                Ok((dist, stat, nojump, passed))
            })
            .collect::<Result<Vec<_>>>()?;
        let dists: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
        let stats_v: Vec<f64> = per_rep.iter().map(|p| p.1).collect();
        let nojump: u64 = per_rep.iter().map(|p| p.2).sum();
        let passed: u64 = per_rep.iter().map(|p| p.3).sum();
        let (paired_dist_mean, paired_dist_se) = stats::mean_se(&dists);
        let (stat_mean, stat_se) = stats::mean_se(&stats_v);
        rows.push(DiscreteRow {
            n,
            h: t / n as f64,
            paired_dist_mean,
            paired_dist_se,
            stat_mean,
            stat_se,
            nojump_pass_frac: if nojump == 0 {
                0.0
            } else {
                passed as f64 / nojump as f64
            },
        });
    }
    Ok(DiscreteReport { rows, reps })
}

/// CLI override knobs applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
}

/// Parse a config, run the requested experiment, and write CSV outputs plus
/// a manifest into the output directory.
pub fn run(config_path: &std::path::Path, overrides: &RunOverrides) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config_path)?;
    if let Some(out) = &overrides.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = overrides.reps {
        cfg.reps = reps;
    }
    let out_dir = std::path::PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let mut summary: Vec<String> = Vec::new();
    match cfg.experiment {
        ExperimentKind::Risk => {
            let model = cfg.build_model()?;
            let coll = ModelCollection::build(cfg.basis_k, cfg.basis_m_max, model.measure())?;
            let pen = cfg.penalty.expect("risk config carries a penalty");
            let t = cfg.t_horizon.expect("risk config carries t.horizon");
            let report = risk_mc(&model, &coll, &pen, t, cfg.reps, cfg.seed)?;
            let check = oracle_check(&report, t, cfg.oracle_max_ratio);
            output::write_risk_csv(&out_dir.join("risk.csv"), &report)?;
            summary.push(format!("ppe_risk_mean = {}", report.ppe_risk_mean));
            summary.push(format!("oracle_m = {}", report.oracle_m));
            summary.push(format!("oracle_ratio = {}", check.ratio));
            summary.push(format!("oracle_additive_slack = {}", check.additive_slack));
            summary.push(format!(
                "oracle_pass = {} (max_ratio = {})",
                check.pass, cfg.oracle_max_ratio
            ));
            if pen.form == crate::estimate::PenaltyForm::B {
                let consts = coll.constants(&model)?;
                if !(consts.beta > 0.0 && consts.phi_inf > 0.0) {
                    summary.push(format!(
                        "warning: penalty form b assumptions violated (beta = {}, phi_inf = {})",
                        consts.beta, consts.phi_inf
                    ));
                }
            }
        }
        ExperimentKind::Rate => {
            let model = cfg.build_model()?;
            let coll = ModelCollection::build(cfg.basis_k, cfg.basis_m_max, model.measure())?;
            let pen = cfg.penalty.expect("rate config carries a penalty");
            let report = rate_experiment(
                &model,
                &coll,
                &pen,
                &cfg.t_grid,
                cfg.reps,
                cfg.seed,
                cfg.rate_tail3,
            )?;
            output::write_rate_csv(&out_dir.join("rate.csv"), &report)?;
            summary.push(format!("slope = {}", report.slope));
            summary.push(format!("intercept = {}", report.intercept));
            summary.push(format!(
                "declared_alpha = {}",
                model.smoothness_alpha()
            ));
        }
        ExperimentKind::Concentration => {
            let lambda = cfg.conc_lambda.expect("concentration carries conc.lambda");
            let report = concentration_check(
                lambda,
                cfg.conc_t,
                &cfg.u_grid,
                cfg.conc_epsilon,
                cfg.reps,
                cfg.seed,
            )?;
            output::write_concentration_csv(&out_dir.join("concentration.csv"), &report)?;
            let worst = report
                .rows
                .iter()
                .map(|r| r.upper_freq - r.bound)
                .fold(f64::NEG_INFINITY, f64::max);
            summary.push(format!("lambda_total = {}", report.lambda_total));
            summary.push(format!("worst_upper_excess_over_bound = {worst}"));
        }
        ExperimentKind::Discrete => {
            let model = cfg.build_model()?;
            let rule = cfg.threshold_rule()?;
            let t = cfg.t_horizon.expect("discrete config carries t.horizon");
            let report = discrete_experiment(
                &model,
                cfg.discrete_m,
                cfg.basis_k,
                &rule,
                &cfg.discrete_n_grid,
                t,
                cfg.reps,
                cfg.seed,
            )?;
            output::write_discrete_csv(&out_dir.join("discrete.csv"), &report)?;
            if let Some(last) = report.rows.last() {
                summary.push(format!("final_paired_dist_mean = {}", last.paired_dist_mean));
                summary.push(format!("final_nojump_pass_frac = {}", last.nojump_pass_frac));
            }
        }
    }

    output::write_manifest(&out_dir.join("manifest.txt"), &cfg, &summary)?;
    for line in &summary {
        println!("{line}");
    }
    println!("outputs written to {}", out_dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::PenaltyForm;
    use crate::model::{catalog, Window};

    fn unit_window() -> Window {
        Window::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn risk_report_oracle_is_smallest_model_for_constant_density() {
        let model = catalog::constant(10.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 16, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::C);
        let report = risk_mc(&model, &coll, &pen, 100.0, 1000, 321).unwrap();
        assert_eq!(report.oracle_m, 1);
        assert!(report.rows[0].bias_sq.abs() < 1e-9);
        // closed form risk(m) = lambda m / T strictly increases in m
        let mut m = 1usize;
        while 2 * m <= 16 {
            let a = report.rows.iter().find(|r| r.m == m).unwrap();
            let b = report.rows.iter().find(|r| r.m == 2 * m).unwrap();
            let se = a.risk_se.unwrap().hypot(b.risk_se.unwrap());
            assert!(
                b.risk_mean > a.risk_mean - 3.0 * se,
                "risk({}) = {} vs risk({}) = {}",
                2 * m,
                b.risk_mean,
                m,
                a.risk_mean
            );
            m *= 2;
        }
        // consistency: mean risk = bias + mean chi within 3 SE per model
        for row in &report.rows {
            let gap = (row.risk_mean - row.bias_sq - row.chi_mean).abs();
            assert!(gap <= 3.0 * row.risk_se.unwrap().max(1e-12), "m = {}", row.m);
        }
        // dominance: selection cannot beat the best model beyond noise and
        // cannot be worse than the worst model beyond noise
        let best = report.rows.iter().map(|r| r.risk_mean).fold(f64::INFINITY, f64::min);
        let worst = report.rows.iter().map(|r| r.risk_mean).fold(0.0, f64::max);
        let se = report.ppe_risk_se.unwrap();
        assert!(report.ppe_risk_mean >= best - 3.0 * se);
        assert!(report.ppe_risk_mean <= worst + 3.0 * se);
        // selection frequencies cover all replications
        let total_freq: f64 = report.rows.iter().map(|r| r.select_freq).sum();
        assert!((total_freq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_replication_reports_no_standard_errors() {
        let model = catalog::constant(10.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 4, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::C);
        let report = risk_mc(&model, &coll, &pen, 20.0, 1, 5).unwrap();
        assert!(report.ppe_risk_se.is_none());
        assert!(report.rows.iter().all(|r| r.risk_se.is_none()));
        assert!(report.ppe_risk_mean.is_finite());
    }

    #[test]
    fn risk_reports_are_deterministic() {
        let model = catalog::constant(10.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 8, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::B);
        let a = risk_mc(&model, &coll, &pen, 30.0, 200, 77).unwrap();
        let b = risk_mc(&model, &coll, &pen, 30.0, 200, 77).unwrap();
        assert_eq!(a.ppe_risk_mean, b.ppe_risk_mean);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.risk_mean, rb.risk_mean);
            assert_eq!(ra.select_freq, rb.select_freq);
        }
    }

    #[test]
    fn oracle_check_is_definitional_and_label_invariant() {
        let mk_row = |m: usize, risk: f64| ModelRiskRow {
            m,
            dim: m,
            sup_sq: m as f64,
            risk_mean: risk,
            risk_se: None,
            bias_sq: 0.0,
            chi_mean: risk,
            pen_mean: 0.0,
            select_freq: 0.0,
        };
        let report = RiskReport {
            rows: vec![mk_row(1, 0.5), mk_row(2, 0.25), mk_row(3, 1.0)],
            excluded: vec![],
            ppe_risk_mean: 0.25, // always selects the oracle
            ppe_risk_se: None,
            oracle_m: 2,
            oracle_ratio: 1.0,
            reps: 1,
        };
        let check = oracle_check(&report, 10.0, 4.0);
        assert_eq!(check.ratio, 1.0);
        assert_eq!(check.additive_slack, 0.0);
        assert!(check.pass);

        // permuting the row order (relabeling models) changes nothing
        let mut permuted = report.clone();
        permuted.rows.rotate_left(1);
        let check_p = oracle_check(&permuted, 10.0, 4.0);
        assert_eq!(check.ratio, check_p.ratio);
    }

    #[test]
    fn concentration_bound_and_oracle_agree() {
        let report =
            concentration_check(10.0, 1.0, &[0.5, 1.0, 2.0, 4.0], 1.0, 50_000, 2024).unwrap();
        for row in &report.rows {
            assert!(row.upper_freq <= row.bound + 3.0 * row.binom_se, "u = {}", row.u);
            assert!(
                (row.upper_freq - row.upper_exact).abs() <= 3.0 * row.binom_se,
                "u = {}: freq {} vs exact {}",
                row.u,
                row.upper_freq,
                row.upper_exact
            );
            // lower-bound failure is rarer than its own e^{-u} bound
            assert!(row.lower_fail_freq <= row.bound + 3.0 * row.binom_se.max(1e-4));
        }
        // the u = 1 event is N >= 15 with exact tail ~ 0.0835
        let u1 = &report.rows[1];
        assert!((u1.upper_exact - 0.08345847293466269).abs() < 1e-9);
        assert!(u1.upper_exact <= (-1.0f64).exp());
    }

    #[test]
    fn tiny_u_bound_degenerates_to_one() {
        let report = concentration_check(10.0, 1.0, &[1e-9], 1.0, 100, 1).unwrap();
        let row = &report.rows[0];
        assert!(row.bound > 0.999_999);
        assert!(row.upper_freq <= 1.0);
    }

    #[test]
    fn tail_expectation_check_validates_inputs() {
        assert!(tail_expectation_check(0.0, 0.0, 1.0).is_err());
        assert!(tail_expectation_check(1.0, 1.0, 0.5).is_err());
        assert!(tail_expectation_check(-1.0, 1.0, 1.0).is_err());
        let c = tail_expectation_check(2.0, 3.0, 1.5).unwrap();
        assert!((c.expectation - 7.0).abs() < 1e-15);
        assert!((c.bound - 10.5).abs() < 1e-15);
        assert!(c.holds);
    }

    #[test]
    fn split_grid_has_no_violations_and_touches_equality() {
        let grid = sqrt_split_grid_check(50, 50, 10.0, &[0.1, 0.5, 1.0, 2.0, 5.0]);
        assert_eq!(grid.points, 12_500);
        assert_eq!(grid.violations, 0);
        // the AM-GM equality locus is on the grid, so the worst margin is
        // at roundoff scale, not comfortably positive
        assert!(grid.worst_margin.abs() < 1e-9, "worst {}", grid.worst_margin);
    }

    #[test]
    fn rate_experiment_smoke_and_se_scaling() {
        let model = catalog::constant(10.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 8, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::C);
        let grid = [5.0, 10.0, 20.0, 50.0];
        let full = rate_experiment(&model, &coll, &pen, &grid, 400, 999, false).unwrap();
        let half = rate_experiment(&model, &coll, &pen, &grid, 200, 555, false).unwrap();
        assert!(full.slope.is_finite() && full.slope < 0.0);
        // joint slope noise from per-point relative SEs on the log scale
        let slope_var = |r: &RateReport| {
            let xs: Vec<f64> = r.points.iter().map(|p| p.t.ln()).collect();
            let mx = xs.iter().sum::<f64>() / xs.len() as f64;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            r.points
                .iter()
                .zip(&xs)
                .map(|(p, x)| {
                    let rel = p.risk_se.unwrap() / p.risk_mean;
                    ((x - mx) / sxx * rel).powi(2)
                })
                .sum::<f64>()
        };
        let joint_se = (slope_var(&full) + slope_var(&half)).sqrt();
        assert!(
            (full.slope - half.slope).abs() <= 3.0 * joint_se,
            "slopes {} vs {} (joint se {joint_se})",
            full.slope,
            half.slope
        );
        // halving replications roughly doubles the variance band
        let ratio = slope_var(&half) / slope_var(&full);
        assert!(ratio > 1.2 && ratio < 3.5, "variance ratio {ratio}");
    }

    #[test]
    fn tail3_uses_only_the_largest_horizons() {
        let model = catalog::lipschitz_kink(10.0, 8.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 16, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::C);
        let grid = [5.0, 10.0, 20.0, 50.0, 100.0];
        let all = rate_experiment(&model, &coll, &pen, &grid, 150, 2222, false).unwrap();
        let tail = rate_experiment(&model, &coll, &pen, &grid, 150, 2222, true).unwrap();
        assert_eq!(all.points.len(), tail.points.len());
        // same per-point risks, different fit windows
        assert_eq!(all.points[0].risk_mean, tail.points[0].risk_mean);
        assert!(all.tail3 != tail.tail3);
        assert_ne!(all.slope, tail.slope);
    }

    #[test]
    fn undersized_horizon_fails_before_replication() {
        let model = catalog::constant(10.0, unit_window()).unwrap();
        let coll = ModelCollection::build(0, 8, model.measure()).unwrap();
        let pen = PenaltyConfig::with_form(PenaltyForm::C);
        let err = risk_mc(&model, &coll, &pen, 0.5, 10, 1).unwrap_err();
        assert!(matches!(err, SieveError::HorizonTooSmall { .. }));
    }
}
