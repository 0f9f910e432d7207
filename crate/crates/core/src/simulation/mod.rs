//! Simulated study population with covariate-dependent trial selection and a
//! covariate-moderated treatment effect.
//!
//! Each subject draws experience `x` from a negative binomial, joins the
//! trial with probability `sigmoid(s₀ + s₁·x)`, and, inside the trial, is
//! randomized to treatment with probability `e₁`. Outcomes depend on `x` only
//! through the conditional effect `τ(x) = κ·exp(−x/λ)`; there is no marginal
//! covariate effect. `κ` is calibrated so that the average of `τ` over the
//! chosen calibration population equals `target_ate`.

mod config;

pub use config::{CalibrationPopulation, ConfigError, SimulationConfig, KEYS as CONFIG_KEYS};

use thiserror::Error;

use crate::domain::{validate, Arm, DomainError, StudyDataset, SubjectRecord};
use crate::numerics::{sample_bernoulli, sample_negative_binomial, sample_normal, NumericsError, RandomSource};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("effect scale has not been calibrated")]
    NotCalibrated,
    #[error("covariate tail mass did not fall below {TAIL_MASS} within {MAX_SUPPORT} terms")]
    NonConvergentTail,
    #[error(transparent)]
    Sampler(#[from] NumericsError),
    #[error("generated dataset is invalid: {0}")]
    Dataset(#[from] DomainError),
}

const TAIL_MASS: f64 = 1e-12;
const MAX_SUPPORT: usize = 1_000_000;

/// Trial-eligibility curve, `sigmoid(s₀ + s₁·x)`.
pub fn selection_probability(x: f64, config: &SimulationConfig) -> f64 {
    let eta = config.selection_intercept + config.selection_slope * x;
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Sums `f(x)·pmf(x)` over the covariate distribution until the remaining
/// probability mass is below `1e-12`. Returns `(Σ f·pmf, Σ pmf)`.
fn sum_over_covariate(config: &SimulationConfig, f: impl Fn(f64) -> f64) -> Result<(f64, f64), SimulationError> {
    let r = config.covariate_dispersion;
    let mu = config.covariate_mean;
    // success probability r/(r+μ) in the failure-count parameterisation
    let ln_q = (mu / (r + mu)).ln();
    let q = mu / (r + mu);
    let mut ln_pmf = -r * (mu / r).ln_1p();
    let (mut weighted, mut mass) = (0.0, 0.0);
    for k in 0..MAX_SUPPORT {
        let x = k as f64;
        let pmf = ln_pmf.exp();
        weighted += f(x) * pmf;
        mass += pmf;
        let ratio = (x + r) / (x + 1.0) * q;
        let rho = ratio.max(q);
        if rho < 1.0 && pmf * rho / (1.0 - rho) < TAIL_MASS {
            return Ok((weighted, mass));
        }
        ln_pmf += ((x + r) / (x + 1.0)).ln() + ln_q;
    }
    Err(SimulationError::NonConvergentTail)
}

/// Exact expected fraction of the population that joins the trial.
pub fn expected_trial_fraction(config: &SimulationConfig) -> Result<f64, SimulationError> {
    let (w, mass) = sum_over_covariate(config, |x| selection_probability(x, config))?;
    Ok(w / mass)
}

/// E[exp(−X/λ)] over the calibration population, by exact summation of
/// the negative-binomial mass (weighted by `1 − P(Trial | x)` for the
/// target population).
pub fn decay_expectation(config: &SimulationConfig) -> Result<f64, SimulationError> {
    let decay = |x: f64| (-x / config.effect_decay).exp();
    let (num, den) = match config.calibration_population {
        CalibrationPopulation::Full => sum_over_covariate(config, decay)?,
        CalibrationPopulation::Target => {
            let (num, _) = sum_over_covariate(config, |x| decay(x) * (1.0 - selection_probability(x, config)))?;
            let (den, _) = sum_over_covariate(config, |x| 1.0 - selection_probability(x, config))?;
            (num, den)
        }
    };
    Ok(num / den)
}

/// κ such that the calibration-population mean of `κ·exp(−X/λ)` equals
/// `target_ate`.
pub fn calibrate_effect_scale(config: &SimulationConfig) -> Result<f64, SimulationError> {
    config.validate()?;
    Ok(config.target_ate / decay_expectation(config)?)
}

impl SimulationConfig {
    /// Returns the configuration with `effect_scale` filled in by
    /// calibration when it was not set explicitly.
    pub fn calibrated(mut self) -> Result<Self, SimulationError> {
        self.validate()?;
        if self.effect_scale.is_none() {
            self.effect_scale = Some(calibrate_effect_scale(&self)?);
        }
        Ok(self)
    }
}

/// Conditional treatment effect τ(x) = κ·exp(−x/λ).
pub fn true_cate(x: f64, config: &SimulationConfig) -> Result<f64, SimulationError> {
    let kappa = config.effect_scale.ok_or(SimulationError::NotCalibrated)?;
    Ok(kappa * (-x / config.effect_decay).exp())
}

/// A generated dataset with the true conditional effect of every subject,
/// index-aligned with the dataset records.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStudy {
    pub dataset: StudyDataset,
    pub true_effects: Vec<f64>,
}

impl GeneratedStudy {
    /// Mean true effect over the target records.
    pub fn realized_target_ate(&self) -> Option<f64> {
        let m = self.dataset.m();
        (m > 0).then(|| {
            self.dataset
                .records()
                .iter()
                .zip(&self.true_effects)
                .filter(|(r, _)| r.s == crate::domain::Sample::Target)
                .map(|(_, t)| t)
                .sum::<f64>()
                / m as f64
        })
    }
}

pub fn generate_dataset(config: &SimulationConfig, rng: &mut RandomSource) -> Result<GeneratedStudy, SimulationError> {
    config.validate()?;
    if config.effect_scale.is_none() {
        return Err(SimulationError::NotCalibrated);
    }
    let mut records = Vec::with_capacity(config.population_size);
    let mut true_effects = Vec::with_capacity(config.population_size);
    for _ in 0..config.population_size {
        let x = sample_negative_binomial(config.covariate_mean, config.covariate_dispersion, rng)? as f64;
        let tau = true_cate(x, config)?;
        if sample_bernoulli(selection_probability(x, config), rng)? {
            let treated = sample_bernoulli(config.propensity, rng)?;
            let arm = if treated { Arm::Treated } else { Arm::Control };
            let y = config.baseline + tau * arm.indicator() + sample_normal(0.0, config.noise_sd, rng)?;
            records.push(SubjectRecord::trial(x, arm, y));
        } else {
            records.push(SubjectRecord::target(x));
        }
        true_effects.push(tau);
    }
    Ok(GeneratedStudy { dataset: validate(records)?, true_effects })
}
