use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

/// Which covariate distribution the effect scale is calibrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationPopulation {
    /// Every simulated subject, regardless of trial selection.
    Full,
    /// Subjects left outside the trial, the population the transport
    /// estimators average over.
    Target,
}

/// Parameters of the data-generating process.
///
/// Covariate: negative binomial with the given mean and dispersion.
/// Trial selection: `P(Trial | x) = sigmoid(selection_intercept + selection_slope·x)`.
/// Outcome: `baseline + τ(x)·a + Normal(0, noise_sd)` with
/// `τ(x) = effect_scale·exp(−x/effect_decay)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub population_size: usize,
    pub covariate_mean: f64,
    pub covariate_dispersion: f64,
    pub selection_intercept: f64,
    pub selection_slope: f64,
    /// `None` until calibrated against `target_ate`.
    pub effect_scale: Option<f64>,
    pub effect_decay: f64,
    pub target_ate: f64,
    pub calibration_population: CalibrationPopulation,
    pub baseline: f64,
    pub noise_sd: f64,
    pub propensity: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            population_size: 1000,
            covariate_mean: 10.0,
            covariate_dispersion: 3.0,
            selection_intercept: 0.5,
            selection_slope: -0.28,
            effect_scale: None,
            effect_decay: 20.0,
            target_ate: 16.7,
            calibration_population: CalibrationPopulation::Target,
            baseline: 50.0,
            noise_sd: 10.0,
            propensity: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub const KEYS: [&str; 12] = [
    "population_size",
    "covariate_mean",
    "covariate_dispersion",
    "selection_intercept",
    "selection_slope",
    "effect_scale",
    "effect_decay",
    "target_ate",
    "calibration_population",
    "baseline",
    "noise_sd",
    "propensity",
];

impl SimulationConfig {
    /// Parses flat `key = value` lines over the defaults. `#` starts a
    /// comment; unknown keys are an error.
    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            config.set_at(key.trim(), value.trim(), line)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Overrides one field, as a command-line `key=value` would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = || ConfigError::InvalidValue { line, key: key.to_string(), value: value.to_string() };
        let real = || value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        match key {
            "population_size" => self.population_size = value.parse().map_err(|_| bad())?,
            "covariate_mean" => self.covariate_mean = real()?,
            "covariate_dispersion" => self.covariate_dispersion = real()?,
            "selection_intercept" => self.selection_intercept = real()?,
            "selection_slope" => self.selection_slope = real()?,
            "effect_scale" => {
                self.effect_scale = match value {
                    "" | "auto" => None,
                    _ => Some(real()?),
                }
            }
            "effect_decay" => self.effect_decay = value.parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(bad)?,
            "target_ate" => self.target_ate = real()?,
            "calibration_population" => {
                self.calibration_population = match value {
                    "full" => CalibrationPopulation::Full,
                    "target" => CalibrationPopulation::Target,
                    _ => return Err(bad()),
                }
            }
            "baseline" => self.baseline = real()?,
            "noise_sd" => self.noise_sd = real()?,
            "propensity" => self.propensity = real()?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.population_size == 0 {
            return fail("population_size must be positive".into());
        }
        if !(self.covariate_mean > 0.0 && self.covariate_dispersion > 0.0) {
            return fail("covariate_mean and covariate_dispersion must be positive".into());
        }
        if !(self.selection_intercept.is_finite() && self.selection_slope.is_finite()) {
            return fail("selection curve parameters must be finite".into());
        }
        if !(self.effect_decay > 0.0) {
            return fail(format!("effect_decay = {} must be positive", self.effect_decay));
        }
        if !(self.target_ate > 0.0 && self.target_ate.is_finite()) {
            return fail(format!("target_ate = {} must be positive", self.target_ate));
        }
        if let Some(k) = self.effect_scale {
            if !(k > 0.0 && k.is_finite()) {
                return fail(format!("effect_scale = {k} must be positive"));
            }
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd = {} must be positive", self.noise_sd));
        }
        if !(self.propensity > 0.0 && self.propensity < 1.0) {
            return fail(format!("propensity = {} must lie in (0, 1)", self.propensity));
        }
        Ok(())
    }

    /// Renders the configuration in the `key = value` format.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "population_size = {}", self.population_size);
        let _ = writeln!(out, "covariate_mean = {}", self.covariate_mean);
        let _ = writeln!(out, "covariate_dispersion = {}", self.covariate_dispersion);
        let _ = writeln!(out, "selection_intercept = {}", self.selection_intercept);
        let _ = writeln!(out, "selection_slope = {}", self.selection_slope);
        match self.effect_scale {
            Some(k) => writeln!(out, "effect_scale = {k}"),
            None => writeln!(out, "effect_scale = auto"),
        }
        .ok();
        let _ = writeln!(out, "effect_decay = {}", self.effect_decay);
        let _ = writeln!(out, "target_ate = {}", self.target_ate);
        let population = match self.calibration_population {
            CalibrationPopulation::Full => "full",
            CalibrationPopulation::Target => "target",
        };
        let _ = writeln!(out, "calibration_population = {population}");
        let _ = writeln!(out, "baseline = {}", self.baseline);
        let _ = writeln!(out, "noise_sd = {}", self.noise_sd);
        let _ = writeln!(out, "propensity = {}", self.propensity);
        out
    }
}
