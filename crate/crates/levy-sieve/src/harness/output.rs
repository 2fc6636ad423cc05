//! CSV and manifest writers. Plain comma-separated files with a header
//! row, dot decimals, and `NA` for unavailable standard errors; bodies are
//! byte-identical across reruns of the same config and seed.

use std::io::Write;
use std::path::Path;

use super::{ConcentrationReport, DiscreteReport, ExperimentConfig, RateReport, RiskReport};
use crate::error::Result;

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => fmt(x),
        None => "NA".to_string(),
    }
}

pub fn write_risk_csv(path: &Path, report: &RiskReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("m,d_m,D_m,risk_mean,risk_se,bias_sq,chi_mean,pen_mean,select_freq\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.m,
            r.dim,
            fmt(r.sup_sq),
            fmt(r.risk_mean),
            fmt_opt(r.risk_se),
            fmt(r.bias_sq),
            fmt(r.chi_mean),
            fmt(r.pen_mean),
            fmt(r.select_freq),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_rate_csv(path: &Path, report: &RateReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,risk_mean,risk_se,mhat_mean\n");
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(p.t),
            fmt(p.risk_mean),
            fmt_opt(p.risk_se),
            fmt(p.mhat_mean),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_concentration_csv(path: &Path, report: &ConcentrationReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("u,threshold,upper_freq,upper_exact,upper_bound,binom_se,lower_fail_freq,lower_exact\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(r.u),
            fmt(r.threshold),
            fmt(r.upper_freq),
            fmt(r.upper_exact),
            fmt(r.bound),
            fmt(r.binom_se),
            fmt(r.lower_fail_freq),
            fmt(r.lower_exact),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_discrete_csv(path: &Path, report: &DiscreteReport) -> Result<()> {
    let mut out = String::new();
    out.push_str("n,h,paired_dist_mean,paired_dist_se,stat_mean,stat_se,nojump_pass_frac\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            fmt(r.h),
            fmt(r.paired_dist_mean),
            fmt_opt(r.paired_dist_se),
            fmt(r.stat_mean),
            fmt_opt(r.stat_se),
            fmt(r.nojump_pass_frac),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Resolved-config echo plus run summary; no timestamps, so reruns match.
pub fn write_manifest(path: &Path, cfg: &ExperimentConfig, summary: &[String]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "levy-sieve {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(f)?;
    writeln!(f, "[config]")?;
    for (k, v) in cfg.echo() {
        writeln!(f, "{k} = {v}")?;
    }
    writeln!(f)?;
    writeln!(f, "[summary]")?;
    for line in summary {
        writeln!(f, "{line}")?;
    }
    Ok(())
}
