//! Overlap, positivity and weight-health checks for a study dataset.

use serde::Serialize;
use thiserror::Error;

use crate::domain::{IpswDetail, StudyDataset};
use crate::estimators::{EligibilityModel, EstimatorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("{what} needs at least {needed} trial and {needed} target records (n = {n}, m = {m})")]
    TooFewRecords { what: &'static str, needed: usize, n: usize, m: usize },
    #[error("pooled covariate standard deviation is zero")]
    ZeroVariance,
    #[error(transparent)]
    Eligibility(#[from] EstimatorError),
}

/// Warning thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Positivity warning below this fitted eligibility.
    pub min_eligibility: f64,
    /// Weights are extreme when ESS falls below this fraction of n.
    pub ess_fraction: f64,
    /// Weights are extreme when one weight carries more than this share of Σw.
    pub max_weight_share: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { min_eligibility: 0.01, ess_fraction: 0.1, max_weight_share: 0.5 }
    }
}

/// Standardized mean difference of `x`, target minus trial, over the pooled
/// standard deviation `sqrt((Σ_trial (x − x̄_trial)² + Σ_target (x − x̄_target)²) / (n + m))`.
pub fn covariate_shift_smd(dataset: &StudyDataset) -> Result<f64, DiagnosticsError> {
    let (n, m) = (dataset.n(), dataset.m());
    if n < 2 || m < 2 {
        return Err(DiagnosticsError::TooFewRecords { what: "standardized mean difference", needed: 2, n, m });
    }
    let trial: Vec<f64> = dataset.trial_covariates().collect();
    let target: Vec<f64> = dataset.target_covariates().collect();
    let (mt, ss_t) = mean_and_squares(&trial);
    let (mo, ss_o) = mean_and_squares(&target);
    let pooled = ((ss_t + ss_o) / (n + m) as f64).sqrt();
    if !(pooled > 0.0) {
        return Err(DiagnosticsError::ZeroVariance);
    }
    Ok((mo - mt) / pooled)
}

fn mean_and_squares(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (mean, v.iter().map(|x| (x - mean).powi(2)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportReport {
    pub trial_support: [f64; 2],
    pub target_support: [f64; 2],
    /// `[max of the mins, min of the maxes]`; empty when the lower end exceeds the upper.
    pub transportable_range: [f64; 2],
    pub out_of_support_fraction: f64,
}

impl SupportReport {
    pub fn overlap_is_empty(&self) -> bool {
        self.transportable_range[0] > self.transportable_range[1]
    }
}

pub fn check_support(dataset: &StudyDataset) -> Result<SupportReport, DiagnosticsError> {
    let (n, m) = (dataset.n(), dataset.m());
    if n < 1 || m < 1 {
        return Err(DiagnosticsError::TooFewRecords { what: "support check", needed: 1, n, m });
    }
    let mut trial = [f64::INFINITY, f64::NEG_INFINITY];
    let mut target = [f64::INFINITY, f64::NEG_INFINITY];
    for r in dataset.records() {
        let range = if r.s == crate::domain::Sample::Trial { &mut trial } else { &mut target };
        range[0] = range[0].min(r.x);
        range[1] = range[1].max(r.x);
    }
    let outside = dataset.target_covariates().filter(|&x| x < trial[0] || x > trial[1]).count();
    Ok(SupportReport {
        trial_support: trial,
        target_support: target,
        transportable_range: [trial[0].max(target[0]), trial[1].min(target[1])],
        out_of_support_fraction: outside as f64 / m as f64,
    })
}

/// Eligibility summary over one rank-decile of the target covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EligibilityBin {
    pub x_range: [f64; 2],
    pub count: usize,
    pub min_eligibility: f64,
    pub mean_eligibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub min_eligibility: f64,
    pub bins: Vec<EligibilityBin>,
    pub warning: bool,
}

/// Fits the trial-eligibility model and evaluates it at every target `x`.
/// Target records are sorted by `x` and split into (at most) ten groups of
/// near-equal size.
pub fn check_positivity(dataset: &StudyDataset, thresholds: &Thresholds) -> Result<PositivityReport, DiagnosticsError> {
    let model = EligibilityModel::fit(dataset)?;
    Ok(positivity_from_model(dataset, &model, thresholds))
}

fn positivity_from_model(
    dataset: &StudyDataset,
    model: &EligibilityModel,
    thresholds: &Thresholds,
) -> PositivityReport {
    let mut xs: Vec<f64> = dataset.target_covariates().collect();
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    let groups = m.min(10);
    let mut bins = Vec::with_capacity(groups);
    for g in 0..groups {
        let chunk = &xs[g * m / groups..(g + 1) * m / groups];
        let p: Vec<f64> = chunk.iter().map(|&x| model.eligibility(x)).collect();
        bins.push(EligibilityBin {
            x_range: [chunk[0], chunk[chunk.len() - 1]],
            count: chunk.len(),
            min_eligibility: p.iter().copied().fold(f64::INFINITY, f64::min),
            mean_eligibility: p.iter().sum::<f64>() / p.len() as f64,
        });
    }
    let min_eligibility = bins.iter().map(|b| b.min_eligibility).fold(f64::INFINITY, f64::min);
    PositivityReport { min_eligibility, bins, warning: min_eligibility < thresholds.min_eligibility }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightHealth {
    pub max_weight: f64,
    pub effective_sample_size: f64,
    pub extreme: bool,
}

pub fn weight_health(detail: &IpswDetail, thresholds: &Thresholds) -> WeightHealth {
    let total: f64 = detail.weights.iter().sum();
    let n = detail.weights.len() as f64;
    let extreme = detail.effective_sample_size < thresholds.ess_fraction * n
        || detail.max_weight > thresholds.max_weight_share * total;
    WeightHealth { max_weight: detail.max_weight, effective_sample_size: detail.effective_sample_size, extreme }
}

/// Everything the diagnostics can say about a dataset. Checks whose
/// preconditions fail leave their fields empty and add a warning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub smd: Option<f64>,
    pub trial_support: Option<[f64; 2]>,
    pub target_support: Option<[f64; 2]>,
    pub transportable_range: Option<[f64; 2]>,
    pub out_of_support_fraction: Option<f64>,
    pub min_eligibility: Option<f64>,
    pub eligibility_bins: Vec<EligibilityBin>,
    pub max_weight: Option<f64>,
    pub effective_sample_size: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn diagnose(dataset: &StudyDataset, thresholds: &Thresholds) -> DiagnosticsReport {
    let mut warnings = Vec::new();
    let smd = covariate_shift_smd(dataset).map_err(|e| warnings.push(format!("smd: {e}"))).ok();
    let support = check_support(dataset).map_err(|e| warnings.push(format!("support: {e}"))).ok();
    if let Some(s) = &support {
        if s.overlap_is_empty() {
            warnings.push("support: trial and target covariate ranges do not overlap".into());
        }
        if s.out_of_support_fraction > 0.0 {
            warnings.push(format!(
                "support: {:.1}% of target records lie outside the trial covariate range",
                100.0 * s.out_of_support_fraction
            ));
        }
    }

    let mut report = DiagnosticsReport {
        smd,
        trial_support: support.map(|s| s.trial_support),
        target_support: support.map(|s| s.target_support),
        transportable_range: support.map(|s| s.transportable_range),
        out_of_support_fraction: support.map(|s| s.out_of_support_fraction),
        min_eligibility: None,
        eligibility_bins: Vec::new(),
        max_weight: None,
        effective_sample_size: None,
        warnings: Vec::new(),
    };

    match EligibilityModel::fit(dataset) {
        Ok(model) => {
            let positivity = positivity_from_model(dataset, &model, thresholds);
            if positivity.warning {
                warnings.push(format!(
                    "positivity: minimum fitted eligibility {:.3e} is below {}",
                    positivity.min_eligibility, thresholds.min_eligibility
                ));
            }
            report.min_eligibility = Some(positivity.min_eligibility);
            report.eligibility_bins = positivity.bins;

            let scale = model.n as f64 / model.m as f64;
            let weights: Vec<f64> = dataset.trial_covariates().map(|x| scale / model.alpha_hat(x)).collect();
            if !weights.is_empty() {
                let health = weight_health(&IpswDetail::from_weights(weights), thresholds);
                if health.extreme {
                    warnings.push(format!(
                        "weights: extreme (max {:.4}, effective sample size {:.1} of {})",
                        health.max_weight,
                        health.effective_sample_size,
                        dataset.n()
                    ));
                }
                report.max_weight = Some(health.max_weight);
                report.effective_sample_size = Some(health.effective_sample_size);
            }
        }
        Err(e) => warnings.push(format!("positivity: {e}")),
    }
    report.warnings = warnings;
    report
}
