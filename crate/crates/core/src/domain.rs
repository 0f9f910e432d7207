//! Study data model: subjects from the randomized trial and from the target
//! population, plus the validated dataset that every estimator consumes.

use serde::Serialize;
use thiserror::Error;

/// Which sample a subject belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    Trial,
    Target,
}

/// Treatment arm within the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    /// 0/1 coding used on disk and in the estimating formulas.
    pub fn indicator(self) -> f64 {
        match self {
            Arm::Control => 0.0,
            Arm::Treated => 1.0,
        }
    }
}

/// One row of the combined study.
///
/// Trial subjects carry an arm and an outcome; target subjects only carry
/// the covariate. Construction does not enforce this, [`validate`] does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubjectRecord {
    pub x: f64,
    pub s: Sample,
    pub a: Option<Arm>,
    pub y: Option<f64>,
}

impl SubjectRecord {
    pub fn trial(x: f64, a: Arm, y: f64) -> Self {
        Self { x, s: Sample::Trial, a: Some(a), y: Some(y) }
    }

    pub fn target(x: f64) -> Self {
        Self { x, s: Sample::Target, a: None, y: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("trial record {row} lacks an arm or an outcome")]
    MissingArmData { row: usize },
    #[error("target record {row} carries an arm or an outcome")]
    TargetWithOutcome { row: usize },
    #[error("record {row} has a non-finite or negative value")]
    NonFiniteValue { row: usize },
    #[error("trial needs at least one treated and one control record (treated={treated}, control={control})")]
    DegenerateTrial { treated: usize, control: usize },
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

/// A validated collection of trial and target records.
///
/// Fields are private so that every instance has gone through [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset {
    records: Vec<SubjectRecord>,
    n: usize,
    m: usize,
    treated: usize,
}

/// Checks every record invariant and the trial-arm requirement.
pub fn validate(records: Vec<SubjectRecord>) -> Result<StudyDataset, DomainError> {
    if records.is_empty() {
        return Err(DomainError::EmptyDataset);
    }
    let mut n = 0;
    let mut treated = 0;
    for (row, r) in records.iter().enumerate() {
        if !r.x.is_finite() || r.x < 0.0 {
            return Err(DomainError::NonFiniteValue { row });
        }
        match r.s {
            Sample::Trial => {
                let (Some(a), Some(y)) = (r.a, r.y) else {
                    return Err(DomainError::MissingArmData { row });
                };
                if !y.is_finite() {
                    return Err(DomainError::NonFiniteValue { row });
                }
                n += 1;
                if a == Arm::Treated {
                    treated += 1;
                }
            }
            Sample::Target => {
                if r.a.is_some() || r.y.is_some() {
                    return Err(DomainError::TargetWithOutcome { row });
                }
            }
        }
    }
    if treated == 0 || treated == n {
        return Err(DomainError::DegenerateTrial { treated, control: n - treated });
    }
    let m = records.len() - n;
    Ok(StudyDataset { records, n, m, treated })
}

/// A trial subject with its arm and outcome unwrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialObservation {
    pub x: f64,
    pub arm: Arm,
    pub y: f64,
}

impl StudyDataset {
    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SubjectRecord> {
        self.records
    }

    /// Trial size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Target size.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_treated(&self) -> usize {
        self.treated
    }

    pub fn n_control(&self) -> usize {
        self.n - self.treated
    }

    pub fn trial(&self) -> impl Iterator<Item = TrialObservation> + '_ {
        self.records.iter().filter_map(|r| match (r.s, r.a, r.y) {
            (Sample::Trial, Some(arm), Some(y)) => Some(TrialObservation { x: r.x, arm, y }),
            _ => None,
        })
    }

    pub fn target_covariates(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter(|r| r.s == Sample::Target).map(|r| r.x)
    }

    pub fn trial_covariates(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter(|r| r.s == Sample::Trial).map(|r| r.x)
    }

    /// Applies `f` to every covariate, revalidating the result.
    pub fn map_covariates(&self, f: impl Fn(f64) -> f64) -> Result<StudyDataset, DomainError> {
        validate(self.records.iter().map(|r| SubjectRecord { x: f(r.x), ..*r }).collect())
    }

    /// Applies `f` to every trial outcome, revalidating the result.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Result<StudyDataset, DomainError> {
        validate(self.records.iter().map(|r| SubjectRecord { y: r.y.map(&f), ..*r }).collect())
    }
}

/// Estimation method, in the order the study reports them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    InteractionOls,
    Ipsw,
    #[serde(rename = "gformula")]
    GFormula,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::InteractionOls, Method::Ipsw, Method::GFormula];

    /// Stable key used in JSON output and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::InteractionOls => "interaction_ols",
            Method::Ipsw => "ipsw",
            Method::GFormula => "gformula",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Naive => "Mean difference",
            Method::InteractionOls => "Interaction OLS",
            Method::Ipsw => "IPSW",
            Method::GFormula => "g-formula",
        }
    }

    /// Accepts the JSON key or the short CLI alias (`ols`).
    pub fn parse(s: &str) -> Option<Method> {
        match s.trim() {
            "naive" => Some(Method::Naive),
            "ols" | "interaction_ols" => Some(Method::InteractionOls),
            "ipsw" => Some(Method::Ipsw),
            "gformula" | "g-formula" => Some(Method::GFormula),
            _ => None,
        }
    }
}

/// Realized IPSW weights and their summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IpswDetail {
    pub weights: Vec<f64>,
    pub max_weight: f64,
    pub effective_sample_size: f64,
}

impl IpswDetail {
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let max_weight = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let effective_sample_size = effective_sample_size(&weights);
        Self { weights, max_weight, effective_sample_size }
    }
}

/// Kish effective sample size, (Σw)²/Σw².
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    sum * sum / sum_sq
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EstimateDetail {
    None,
    Interaction { intercept: f64, theta: f64, target_mean_x: f64 },
    Ipsw(IpswDetail),
    GFormula { treated_coefficients: Vec<f64>, control_coefficients: Vec<f64>, constant_covariate_fallback: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteEstimate {
    pub method: Method,
    pub value: f64,
    pub detail: EstimateDetail,
}
