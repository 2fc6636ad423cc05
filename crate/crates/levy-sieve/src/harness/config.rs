//! Flat key-value experiment configuration with dotted keys.
//!
//! The format is line-oriented text: `key = value`, `#` starts a comment,
//! blank lines are ignored. Lists are comma-separated. Unknown keys are
//! rejected so typos surface immediately.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Result, SieveError};
use crate::estimate::{PenaltyConfig, PenaltyForm};
use crate::model::{catalog, LevyModel, MeasureKind, ReferenceMeasure, Window};
use crate::discrete::ThresholdRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Risk,
    Rate,
    Concentration,
    Discrete,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Risk => "risk",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::Discrete => "discrete",
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub reps: u64,
    pub out_dir: String,

    // model and basis (risk, rate, discrete)
    pub model_name: Option<String>,
    pub model_params: BTreeMap<String, f64>,
    pub window: Option<(f64, f64)>,
    pub measure_kind: MeasureKind,
    pub sigma: f64,
    pub drift: f64,
    pub basis_k: usize,
    pub basis_m_max: usize,

    // penalty (risk, rate)
    pub penalty: Option<PenaltyConfig>,

    // risk
    pub t_horizon: Option<f64>,
    pub oracle_max_ratio: f64,

    // rate
    pub t_grid: Vec<f64>,
    pub rate_tail3: bool,

    // concentration
    pub conc_lambda: Option<f64>,
    pub conc_t: f64,
    pub u_grid: Vec<f64>,
    pub conc_epsilon: f64,

    // discrete
    pub discrete_n_grid: Vec<usize>,
    pub discrete_m: usize,
    pub threshold_kappa: f64,
    pub threshold_gamma: f64,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SieveError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_str_content(&text)
    }

    pub fn from_str_content(text: &str) -> Result<Self> {
        let raw = parse_flat(text)?;
        resolve(raw)
    }

    /// Construct the ground-truth model described by the config.
    pub fn build_model(&self) -> Result<LevyModel> {
        let name = self
            .model_name
            .as_deref()
            .ok_or_else(|| SieveError::Config("missing key model.name".into()))?;
        let (lo, hi) = self
            .window
            .ok_or_else(|| SieveError::Config("missing keys window.lo / window.hi".into()))?;
        let window = Window::new(lo, hi)?;
        let measure = match self.measure_kind {
            MeasureKind::Lebesgue => ReferenceMeasure::lebesgue(window),
            MeasureKind::InverseSquare => ReferenceMeasure::inverse_square(window)?,
            MeasureKind::CustomGrid => {
                return Err(SieveError::Config(
                    "measure.kind = custom-grid is API-only; use lebesgue or inverse-square".into(),
                ))
            }
        };
        catalog::from_id(name, &self.model_params, window, measure, self.sigma, self.drift)
    }

    pub fn build_measure(&self) -> Result<ReferenceMeasure> {
        Ok(self.build_model()?.measure().clone())
    }

    pub fn threshold_rule(&self) -> Result<ThresholdRule> {
        ThresholdRule::power_law(self.threshold_kappa, self.threshold_gamma)
    }

    /// Canonical key=value echo for the run manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        // the output directory is not part of the experiment identity and
        // stays out of the echo so reruns into fresh directories match
        put("experiment", self.experiment.as_str().to_string());
        put("seed", self.seed.to_string());
        put("reps", self.reps.to_string());
        if let Some(name) = &self.model_name {
            put("model.name", name.clone());
            for (k, v) in &self.model_params {
                put(&format!("model.{k}"), v.to_string());
            }
            let (lo, hi) = self.window.unwrap_or((f64::NAN, f64::NAN));
            put("window.lo", lo.to_string());
            put("window.hi", hi.to_string());
            put(
                "measure.kind",
                match self.measure_kind {
                    MeasureKind::Lebesgue => "lebesgue".to_string(),
                    MeasureKind::InverseSquare => "inverse-square".to_string(),
                    MeasureKind::CustomGrid => "custom-grid".to_string(),
                },
            );
            put("sigma", self.sigma.to_string());
            put("drift", self.drift.to_string());
            put("basis.k", self.basis_k.to_string());
            put("basis.mmax", self.basis_m_max.to_string());
        }
        if let Some(pen) = &self.penalty {
            put("penalty.form", pen.form.as_str().to_string());
            put("penalty.c", pen.c.to_string());
            put("penalty.c1", pen.c1.to_string());
            put("penalty.c2", pen.c2.to_string());
        }
        match self.experiment {
            ExperimentKind::Risk => {
                put("t.horizon", self.t_horizon.unwrap_or(f64::NAN).to_string());
                put("oracle.max_ratio", self.oracle_max_ratio.to_string());
            }
            ExperimentKind::Rate => {
                put(
                    "t.grid",
                    self.t_grid
                        .iter()
                        .map(|t| t.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
                put("rate.tail3", self.rate_tail3.to_string());
            }
            ExperimentKind::Concentration => {
                put("conc.lambda", self.conc_lambda.unwrap_or(f64::NAN).to_string());
                put("conc.t", self.conc_t.to_string());
                put("conc.epsilon", self.conc_epsilon.to_string());
                put(
                    "u.grid",
                    self.u_grid
                        .iter()
                        .map(|u| u.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
            ExperimentKind::Discrete => {
                put(
                    "discrete.ngrid",
                    self.discrete_n_grid
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
                put("discrete.m", self.discrete_m.to_string());
                put("t.horizon", self.t_horizon.unwrap_or(f64::NAN).to_string());
                put("threshold.kappa", self.threshold_kappa.to_string());
                put("threshold.gamma", self.threshold_gamma.to_string());
            }
        }
        m
    }
}

fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SieveError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(SieveError::Config(format!(
                "line {}: empty key or value",
                lineno + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(SieveError::Config(format!("duplicate key {key}")));
        }
    }
    Ok(map)
}

struct KeyReader {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl KeyReader {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.get(key)
            .ok_or_else(|| SieveError::Config(format!("missing key {key}")))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| SieveError::Config(format!("key {key}: `{v}` is not a number"))),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| SieveError::Config(format!("missing key {key}")))
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| SieveError::Config(format!("key {key}: `{v}` is not an integer"))),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(SieveError::Config(format!(
                    "key {key}: `{other}` is not a boolean"
                ))),
            },
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| {
                        SieveError::Config(format!("key {key}: `{p}` is not a number"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn usize_list(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<usize>().map_err(|_| {
                        SieveError::Config(format!("key {key}: `{p}` is not an integer"))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Consume every model.* key except model.name as an f64 parameter.
    fn model_params(&mut self) -> Result<BTreeMap<String, f64>> {
        let keys: Vec<String> = self
            .map
            .keys()
            .filter(|k| k.starts_with("model.") && *k != "model.name")
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for k in keys {
            let v = self.require_f64(&k)?;
            out.insert(k.trim_start_matches("model.").to_string(), v);
        }
        Ok(out)
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<String> = self
            .map
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(SieveError::Config(format!(
                "unknown key(s): {}",
                unknown.join(", ")
            )))
        }
    }
}

fn resolve(raw: BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let mut r = KeyReader {
        map: raw,
        used: BTreeSet::new(),
    };

    let experiment = match r.require("experiment")?.as_str() {
        "risk" => ExperimentKind::Risk,
        "rate" => ExperimentKind::Rate,
        "concentration" => ExperimentKind::Concentration,
        "discrete" => ExperimentKind::Discrete,
        other => {
            return Err(SieveError::Config(format!(
                "unknown experiment `{other}`; valid: risk, rate, concentration, discrete"
            )))
        }
    };

    let seed = r.u64("seed")?.unwrap_or(42);
    let reps = r.u64("reps")?.unwrap_or(2000);
    if reps == 0 {
        return Err(SieveError::Config("reps must be >= 1".into()));
    }
    let out_dir = r.get("out").unwrap_or_else(|| "out".to_string());

    let needs_model = matches!(
        experiment,
        ExperimentKind::Risk | ExperimentKind::Rate | ExperimentKind::Discrete
    );

    let mut model_name = None;
    let mut model_params = BTreeMap::new();
    let mut window = None;
    let mut measure_kind = MeasureKind::Lebesgue;
    let mut sigma = 0.0;
    let mut drift = 0.0;
    let mut basis_k = 0;
    let mut basis_m_max = 64;
    if needs_model {
        model_name = Some(r.require("model.name")?);
        model_params = r.model_params()?;
        window = Some((r.require_f64("window.lo")?, r.require_f64("window.hi")?));
        measure_kind = match r.get("measure.kind").as_deref() {
            None | Some("lebesgue") => MeasureKind::Lebesgue,
            Some("inverse-square") => MeasureKind::InverseSquare,
            Some(other) => {
                return Err(SieveError::Config(format!(
                    "key measure.kind: `{other}` is not one of lebesgue, inverse-square"
                )))
            }
        };
        sigma = r.f64("sigma")?.unwrap_or(0.0);
        drift = r.f64("drift")?.unwrap_or(0.0);
        basis_k = r.usize("basis.k")?.unwrap_or(0);
        basis_m_max = r.usize("basis.mmax")?.unwrap_or(64);
    }

    let needs_penalty = matches!(experiment, ExperimentKind::Risk | ExperimentKind::Rate);
    let penalty = if needs_penalty {
        let form = PenaltyForm::parse(&r.require("penalty.form")?)?;
        let c = if form == PenaltyForm::Raw32 {
            r.f64("penalty.c")?.unwrap_or(2.0)
        } else {
            r.require_f64("penalty.c")?
        };
        let c1 = match form {
            PenaltyForm::A | PenaltyForm::C => r.require_f64("penalty.c1")?,
            _ => r.f64("penalty.c1")?.unwrap_or(1.0),
        };
        let c2 = match form {
            PenaltyForm::C => r.require_f64("penalty.c2")?,
            _ => r.f64("penalty.c2")?.unwrap_or(1.0),
        };
        Some(PenaltyConfig::new(form, c, c1, c2)?)
    } else {
        None
    };

    let mut t_horizon = None;
    let mut oracle_max_ratio = 4.0;
    let mut t_grid = Vec::new();
    let mut rate_tail3 = false;
    let mut conc_lambda = None;
    let mut conc_t = 1.0;
    let mut u_grid = vec![0.5, 1.0, 2.0, 4.0];
    let mut conc_epsilon = 1.0;
    let mut discrete_n_grid = Vec::new();
    let mut discrete_m = 4;
    let mut threshold_kappa = 1.0;
    let mut threshold_gamma = 0.9;

    match experiment {
        ExperimentKind::Risk => {
            t_horizon = Some(r.require_f64("t.horizon")?);
            oracle_max_ratio = r.f64("oracle.max_ratio")?.unwrap_or(4.0);
        }
        ExperimentKind::Rate => {
            t_grid = r
                .f64_list("t.grid")?
                .ok_or_else(|| SieveError::Config("missing key t.grid".into()))?;
            if t_grid.len() < 4 {
                return Err(SieveError::Config(
                    "key t.grid: need at least 4 horizons".into(),
                ));
            }
            if !t_grid.windows(2).all(|w| w[0] < w[1]) {
                return Err(SieveError::Config(
                    "key t.grid: horizons must be strictly increasing".into(),
                ));
            }
            if t_grid.last().unwrap() / t_grid[0] < 10.0 {
                return Err(SieveError::Config(
                    "key t.grid: grid must span at least one decade".into(),
                ));
            }
            rate_tail3 = r.bool("rate.tail3")?.unwrap_or(false);
        }
        ExperimentKind::Concentration => {
            conc_lambda = Some(r.require_f64("conc.lambda")?);
            conc_t = r.f64("conc.t")?.unwrap_or(1.0);
            if let Some(g) = r.f64_list("u.grid")? {
                u_grid = g;
            }
            conc_epsilon = r.f64("conc.epsilon")?.unwrap_or(1.0);
        }
        ExperimentKind::Discrete => {
            t_horizon = Some(r.require_f64("t.horizon")?);
            discrete_n_grid = match (r.usize("discrete.n")?, r.usize_list("discrete.ngrid")?) {
                (Some(n), None) => vec![n],
                (None, Some(g)) => g,
                (Some(_), Some(_)) => {
                    return Err(SieveError::Config(
                        "give either discrete.n or discrete.ngrid, not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(SieveError::Config(
                        "missing key discrete.n (or discrete.ngrid)".into(),
                    ))
                }
            };
            if discrete_n_grid.contains(&0) {
                return Err(SieveError::Config("discrete.n must be >= 1".into()));
            }
            discrete_m = r.usize("discrete.m")?.unwrap_or(4);
            threshold_kappa = r.f64("threshold.kappa")?.unwrap_or(1.0);
            threshold_gamma = r.f64("threshold.gamma")?.unwrap_or(0.9);
        }
    }

    r.finish()?;

    Ok(ExperimentConfig {
        experiment,
        seed,
        reps,
        out_dir,
        model_name,
        model_params,
        window,
        measure_kind,
        sigma,
        drift,
        basis_k,
        basis_m_max,
        penalty,
        t_horizon,
        oracle_max_ratio,
        t_grid,
        rate_tail3,
        conc_lambda,
        conc_t,
        u_grid,
        conc_epsilon,
        discrete_n_grid,
        discrete_m,
        threshold_kappa,
        threshold_gamma,
    })
}
