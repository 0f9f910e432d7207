//! Average-treatment-effect estimators.
//!
//! * [`estimate_naive`]: difference in arm means within the trial.
//! * [`estimate_interaction_ols`]: `y ~ 1 + a·x` on the trial, with the
//!   fitted effect averaged over the target covariates.
//! * [`estimate_ipsw`]: trial outcomes reweighted by the inverse odds of
//!   trial membership, `(1/n) Σ (n/m)·yᵢ/α̂(xᵢ)·(aᵢ/e₁ − (1−aᵢ)/(1−e₁))`.
//! * [`estimate_gformula`]: separate per-arm outcome regressions, whose
//!   difference is averaged over the target covariates.

use thiserror::Error;

use crate::domain::{Arm, AteEstimate, EstimateDetail, IpswDetail, Method, StudyDataset};
use crate::numerics::{
    fit_logistic_with, fit_ols, fit_polynomial, LinearFit, LogisticFit, LogisticOptions, NumericsError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("degenerate trial: {0}")]
    DegenerateTrial(String),
    #[error("estimator requires at least one target record")]
    NoTargetRecords,
    #[error("rank-deficient regression: {0}")]
    RankDeficient(String),
    #[error("eligibility model separation: {0}")]
    Separation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("estimate is not finite")]
    NonFiniteEstimate,
}

impl EstimatorError {
    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            EstimatorError::DegenerateTrial(_) => "DegenerateTrial",
            EstimatorError::NoTargetRecords => "NoTargetRecords",
            EstimatorError::RankDeficient(_) => "RankDeficient",
            EstimatorError::Separation(_) => "Separation",
            EstimatorError::InvalidParameter(_) => "InvalidParameter",
            EstimatorError::NonFiniteEstimate => "NonFiniteEstimate",
        }
    }

    /// Separation and non-finite results are numerical failures; the rest
    /// are problems with the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, EstimatorError::Separation(_) | EstimatorError::NonFiniteEstimate)
    }
}

fn from_numerics(context: &str, e: NumericsError) -> EstimatorError {
    match e {
        NumericsError::RankDeficient { column } => {
            EstimatorError::RankDeficient(format!("{context}: design column {column} is collinear"))
        }
        NumericsError::Separation { reason } => EstimatorError::Separation(format!("{context}: {reason}")),
        NumericsError::DegenerateLabels => {
            EstimatorError::DegenerateTrial(format!("{context}: only one sample present"))
        }
        other => EstimatorError::InvalidParameter(format!("{context}: {other}")),
    }
}

fn finite(value: f64) -> Result<f64, EstimatorError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EstimatorError::NonFiniteEstimate)
    }
}

/// Treatment propensity within the trial, known from the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropensityPolicy {
    e1: f64,
}

impl PropensityPolicy {
    pub fn new(e1: f64) -> Result<Self, EstimatorError> {
        if e1 > 0.0 && e1 < 1.0 {
            Ok(Self { e1 })
        } else {
            Err(EstimatorError::InvalidParameter(format!("propensity e1 = {e1} must lie in (0, 1)")))
        }
    }

    pub fn e1(&self) -> f64 {
        self.e1
    }
}

impl Default for PropensityPolicy {
    fn default() -> Self {
        Self { e1: 0.5 }
    }
}

/// Trial-eligibility model: logistic regression of trial membership on the
/// covariate over all `n + m` records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EligibilityModel {
    pub logistic: LogisticFit,
    pub n: usize,
    pub m: usize,
}

impl EligibilityModel {
    pub fn fit(dataset: &StudyDataset) -> Result<Self, EstimatorError> {
        Self::fit_with(dataset, &LogisticOptions::default())
    }

    pub fn fit_with(dataset: &StudyDataset, options: &LogisticOptions) -> Result<Self, EstimatorError> {
        if dataset.m() == 0 {
            return Err(EstimatorError::NoTargetRecords);
        }
        let (features, labels): (Vec<f64>, Vec<bool>) =
            dataset.records().iter().map(|r| (r.x, r.s == crate::domain::Sample::Trial)).unzip();
        let logistic =
            fit_logistic_with(&features, &labels, options).map_err(|e| from_numerics("eligibility model", e))?;
        Ok(Self { logistic, n: dataset.n(), m: dataset.m() })
    }

    /// Fitted P(Trial | x), clipped away from 0 and 1.
    pub fn eligibility(&self, x: f64) -> f64 {
        self.logistic.probability(x)
    }

    /// Odds of trial membership, α̂(x) = p̂/(1 − p̂).
    pub fn alpha_hat(&self, x: f64) -> f64 {
        self.logistic.odds(x)
    }
}

fn check_arms(dataset: &StudyDataset, min_per_arm: usize, what: &str) -> Result<(), EstimatorError> {
    let (t, c) = (dataset.n_treated(), dataset.n_control());
    if t < min_per_arm || c < min_per_arm {
        return Err(EstimatorError::DegenerateTrial(format!(
            "{what} needs at least {min_per_arm} records per arm (treated={t}, control={c})"
        )));
    }
    Ok(())
}

fn target_mean(dataset: &StudyDataset) -> Result<f64, EstimatorError> {
    if dataset.m() == 0 {
        return Err(EstimatorError::NoTargetRecords);
    }
    Ok(dataset.target_covariates().sum::<f64>() / dataset.m() as f64)
}

pub fn estimate_naive(dataset: &StudyDataset) -> Result<AteEstimate, EstimatorError> {
    check_arms(dataset, 1, "mean difference")?;
    let (mut sum_t, mut sum_c) = (0.0, 0.0);
    for obs in dataset.trial() {
        match obs.arm {
            Arm::Treated => sum_t += obs.y,
            Arm::Control => sum_c += obs.y,
        }
    }
    let value = sum_t / dataset.n_treated() as f64 - sum_c / dataset.n_control() as f64;
    Ok(AteEstimate { method: Method::Naive, value: finite(value)?, detail: EstimateDetail::None })
}

/// Fits `y = α + θ·a·x` on the trial (no marginal arm or covariate terms)
/// and reports θ̂ times the mean target covariate.
pub fn estimate_interaction_ols(dataset: &StudyDataset) -> Result<AteEstimate, EstimatorError> {
    check_arms(dataset, 2, "interaction regression")?;
    let target_mean_x = target_mean(dataset)?;
    let (rows, ys): (Vec<[f64; 2]>, Vec<f64>) = dataset.trial().map(|o| ([1.0, o.arm.indicator() * o.x], o.y)).unzip();
    let fit = fit_ols(&rows, &ys).map_err(|e| from_numerics("interaction regression", e))?;
    let (intercept, theta) = (fit.coefficients[0], fit.coefficients[1]);
    Ok(AteEstimate {
        method: Method::InteractionOls,
        value: finite(theta * target_mean_x)?,
        detail: EstimateDetail::Interaction { intercept, theta, target_mean_x },
    })
}

pub fn estimate_ipsw(dataset: &StudyDataset, policy: PropensityPolicy) -> Result<AteEstimate, EstimatorError> {
    check_arms(dataset, 2, "IPSW")?;
    let model = EligibilityModel::fit(dataset)?;
    estimate_ipsw_with_model(dataset, policy, |x| model.alpha_hat(x))
}

/// IPSW with a caller-supplied trial-eligibility odds function.
pub fn estimate_ipsw_with_model(
    dataset: &StudyDataset,
    policy: PropensityPolicy,
    alpha_hat: impl Fn(f64) -> f64,
) -> Result<AteEstimate, EstimatorError> {
    if dataset.m() == 0 {
        return Err(EstimatorError::NoTargetRecords);
    }
    let n = dataset.n() as f64;
    let ratio = n / dataset.m() as f64;
    let e1 = policy.e1();
    let mut weights = Vec::with_capacity(dataset.n());
    let mut total = 0.0;
    for obs in dataset.trial() {
        let alpha = alpha_hat(obs.x);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(EstimatorError::InvalidParameter(format!("eligibility odds {alpha} at x = {}", obs.x)));
        }
        let w = ratio / alpha;
        let arm_term = match obs.arm {
            Arm::Treated => 1.0 / e1,
            Arm::Control => -1.0 / (1.0 - e1),
        };
        total += w * obs.y * arm_term;
        weights.push(w);
    }
    Ok(AteEstimate {
        method: Method::Ipsw,
        value: finite(total / n)?,
        detail: EstimateDetail::Ipsw(IpswDetail::from_weights(weights)),
    })
}

/// Per-arm polynomial outcome models evaluated over the target covariates.
///
/// An arm whose covariate is constant cannot identify a slope; it falls back
/// to an intercept-only model and the detail records the fallback.
pub fn estimate_gformula(dataset: &StudyDataset, basis_degree: usize) -> Result<AteEstimate, EstimatorError> {
    check_arms(dataset, basis_degree + 2, "g-formula")?;
    if dataset.m() == 0 {
        return Err(EstimatorError::NoTargetRecords);
    }
    let mut fallback = false;
    let mut arm_fit = |arm: Arm| -> Result<LinearFit, EstimatorError> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = dataset.trial().filter(|o| o.arm == arm).map(|o| (o.x, o.y)).unzip();
        let constant = xs.iter().all(|&x| x == xs[0]);
        let degree = if constant && basis_degree > 0 {
            fallback = true;
            0
        } else {
            basis_degree
        };
        fit_polynomial(&xs, &ys, degree).map_err(|e| from_numerics(&format!("{arm:?} arm outcome model"), e))
    };
    let treated = arm_fit(Arm::Treated)?;
    let control = arm_fit(Arm::Control)?;
    let sum: f64 = dataset.target_covariates().map(|x| treated.predict(x) - control.predict(x)).sum();
    Ok(AteEstimate {
        method: Method::GFormula,
        value: finite(sum / dataset.m() as f64)?,
        detail: EstimateDetail::GFormula {
            treated_coefficients: treated.coefficients,
            control_coefficients: control.coefficients,
            constant_covariate_fallback: fallback,
        },
    })
}

/// Parameters shared by [`estimate`] across methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationSettings {
    pub policy: PropensityPolicy,
    pub basis_degree: usize,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self { policy: PropensityPolicy::default(), basis_degree: 1 }
    }
}

pub fn estimate(
    dataset: &StudyDataset,
    method: Method,
    settings: &EstimationSettings,
) -> Result<AteEstimate, EstimatorError> {
    match method {
        Method::Naive => estimate_naive(dataset),
        Method::InteractionOls => estimate_interaction_ols(dataset),
        Method::Ipsw => estimate_ipsw(dataset, settings.policy),
        Method::GFormula => estimate_gformula(dataset, settings.basis_degree),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate, SubjectRecord};

    fn t(x: f64, a: u8, y: f64) -> SubjectRecord {
        SubjectRecord::trial(x, if a == 1 { Arm::Treated } else { Arm::Control }, y)
    }

    fn tg(x: f64) -> SubjectRecord {
        SubjectRecord::target(x)
    }

    #[test]
    fn naive_difference() {
        let d = validate(vec![t(0.0, 1, 1.0), t(1.0, 1, 1.0), t(2.0, 0, 0.0), t(3.0, 0, 0.0)]).unwrap();
        assert_eq!(estimate_naive(&d).unwrap().value, 1.0);
        let same = validate(vec![t(0.0, 1, 4.0), t(1.0, 0, 4.0)]).unwrap();
        assert_eq!(estimate_naive(&same).unwrap().value, 0.0);
    }

    #[test]
    fn interaction_recovers_noise_free_model() {
        let mut rows: Vec<_> = [1.0, 4.0, 9.0, 16.0].iter().map(|&x| t(x, 1, 2.0 + 0.5 * x)).collect();
        rows.extend([3.0, 5.0, 8.0].iter().map(|&x| t(x, 0, 2.0)));
        rows.extend([10.0, 30.0].map(tg));
        let e = estimate_interaction_ols(&validate(rows).unwrap()).unwrap();
        let EstimateDetail::Interaction { intercept, theta, target_mean_x } = e.detail else { panic!() };
        assert!((theta - 0.5).abs() < 1e-12 && (intercept - 2.0).abs() < 1e-12);
        assert_eq!(target_mean_x, 20.0);
        assert!((e.value - 10.0).abs() < 1e-10);
    }

    #[test]
    fn interaction_with_zero_target_mean() {
        let d =
            validate(vec![t(1.0, 1, 3.0), t(2.0, 1, 5.0), t(1.0, 0, 1.0), t(3.0, 0, 1.0), tg(0.0), tg(0.0)]).unwrap();
        assert_eq!(estimate_interaction_ols(&d).unwrap().value, 0.0);
    }

    #[test]
    fn interaction_hand_solution() {
        // z = a·x = {1, 2, 0, 0}, y = {3, 5, 1, 1}
        // Σz = 3, Σz² = 5, Σy = 10, Σzy = 13, n = 4, det = 4·5 − 9 = 11
        // θ = (4·13 − 3·10)/11 = 2, α = (5·10 − 3·13)/11 = 1; target mean 3 → 6
        let d =
            validate(vec![t(1.0, 1, 3.0), t(2.0, 1, 5.0), t(1.0, 0, 1.0), t(3.0, 0, 1.0), tg(2.0), tg(4.0)]).unwrap();
        let e = estimate_interaction_ols(&d).unwrap();
        assert!((e.value - 6.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_rank_deficient_when_treated_at_zero() {
        let d = validate(vec![t(0.0, 1, 3.0), t(0.0, 1, 5.0), t(1.0, 0, 1.0), t(3.0, 0, 1.0), tg(2.0)]).unwrap();
        assert!(matches!(estimate_interaction_ols(&d), Err(EstimatorError::RankDeficient(_))));
    }

    #[test]
    fn ipsw_hand_evaluation_with_imposed_odds() {
        // n = 4, m = 2 → n/m = 2; e1 = 0.5 → arm factors ±2
        // α̂ = 0.5 + x/10 → {0.6, 0.7, 0.8, 0.9}
        // terms: 2·10/0.6·2 = 66.666…, 2·12/0.7·2 = 68.571…, −2·4/0.8·2 = −20, −2·6/0.9·2 = −26.666…
        let d =
            validate(vec![t(1.0, 1, 10.0), t(2.0, 1, 12.0), t(3.0, 0, 4.0), t(4.0, 0, 6.0), tg(1.0), tg(5.0)]).unwrap();
        let e = estimate_ipsw_with_model(&d, PropensityPolicy::default(), |x| 0.5 + x / 10.0).unwrap();
        let expected = (200.0 / 3.0 + 480.0 / 7.0 - 20.0 - 80.0 / 3.0) / 4.0;
        assert!((e.value - expected).abs() < 1e-12);
        let EstimateDetail::Ipsw(detail) = e.detail else { panic!() };
        assert!((detail.max_weight - 2.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn ipsw_reduces_to_naive_under_identical_covariates() {
        let xs = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0];
        let mut rows: Vec<_> =
            xs.iter().enumerate().map(|(i, &x)| t(x, (i % 2) as u8, 50.0 + x * (i % 2) as f64)).collect();
        rows.extend(xs.map(tg));
        let d = validate(rows).unwrap();
        let ipsw = estimate_ipsw(&d, PropensityPolicy::default()).unwrap().value;
        let naive = estimate_naive(&d).unwrap().value;
        assert!((ipsw - naive).abs() <= 1e-6 * (1.0 + naive.abs()), "{ipsw} vs {naive}");
    }

    #[test]
    fn ipsw_propagates_separation() {
        let d =
            validate(vec![t(1.0, 1, 1.0), t(2.0, 1, 1.0), t(1.5, 0, 1.0), t(2.5, 0, 1.0), tg(10.0), tg(11.0)]).unwrap();
        assert!(matches!(estimate_ipsw(&d, PropensityPolicy::default()), Err(EstimatorError::Separation(_))));
    }

    #[test]
    fn gformula_constant_arms() {
        let d = validate(vec![
            t(1.0, 1, 7.0),
            t(2.0, 1, 7.0),
            t(4.0, 1, 7.0),
            t(1.0, 0, 3.0),
            t(3.0, 0, 3.0),
            t(5.0, 0, 3.0),
            tg(10.0),
            tg(20.0),
        ])
        .unwrap();
        assert!((estimate_gformula(&d, 1).unwrap().value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gformula_degree_zero_is_naive() {
        let d = validate(vec![t(1.0, 1, 7.0), t(2.0, 1, 9.0), t(1.0, 0, 3.0), t(3.0, 0, 2.0), tg(10.0)]).unwrap();
        let g = estimate_gformula(&d, 0).unwrap().value;
        assert!((g - estimate_naive(&d).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn gformula_exact_linear_model() {
        // y = a·(2 + 3x) → μ̂₁(x) = 2 + 3x, μ̂₀ = 0; target {1, 3} → mean{5, 11} = 8
        let d = validate(vec![
            t(0.0, 1, 2.0),
            t(1.0, 1, 5.0),
            t(2.0, 1, 8.0),
            t(0.0, 0, 0.0),
            t(2.0, 0, 0.0),
            t(4.0, 0, 0.0),
            tg(1.0),
            tg(3.0),
        ])
        .unwrap();
        assert!((estimate_gformula(&d, 1).unwrap().value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gformula_constant_covariate_fallback() {
        let d = validate(vec![
            t(2.0, 1, 7.0),
            t(2.0, 1, 9.0),
            t(2.0, 1, 8.0),
            t(1.0, 0, 3.0),
            t(3.0, 0, 5.0),
            t(5.0, 0, 7.0),
            tg(3.0),
        ])
        .unwrap();
        let e = estimate_gformula(&d, 1).unwrap();
        assert!((e.value - (8.0 - 5.0)).abs() < 1e-12);
        assert!(matches!(e.detail, EstimateDetail::GFormula { constant_covariate_fallback: true, .. }));
    }

    #[test]
    fn transport_methods_need_target_records() {
        let d = validate(vec![
            t(1.0, 1, 7.0),
            t(2.0, 1, 9.0),
            t(4.0, 1, 1.0),
            t(1.0, 0, 3.0),
            t(3.0, 0, 2.0),
            t(3.5, 0, 2.0),
        ])
        .unwrap();
        assert_eq!(estimate_interaction_ols(&d).unwrap_err(), EstimatorError::NoTargetRecords);
        assert_eq!(estimate_ipsw(&d, PropensityPolicy::default()).unwrap_err(), EstimatorError::NoTargetRecords);
        assert_eq!(estimate_gformula(&d, 1).unwrap_err(), EstimatorError::NoTargetRecords);
    }

    #[test]
    fn minimal_dataset_only_supports_naive() {
        let d = validate(vec![t(1.0, 1, 7.0), t(2.0, 0, 3.0), tg(3.0)]).unwrap();
        assert!(estimate_naive(&d).is_ok());
        for m in [Method::InteractionOls, Method::Ipsw, Method::GFormula] {
            let err = estimate(&d, m, &EstimationSettings::default()).unwrap_err();
            assert!(matches!(err, EstimatorError::DegenerateTrial(_)), "{m:?}: {err:?}");
        }
    }

    #[test]
    fn propensity_bounds() {
        assert!(PropensityPolicy::new(0.0).is_err());
        assert!(PropensityPolicy::new(1.0).is_err());
        assert_eq!(PropensityPolicy::new(0.3).unwrap().e1(), 0.3);
    }
}
