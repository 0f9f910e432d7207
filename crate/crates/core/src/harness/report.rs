use serde::Serialize;

use super::PerMethod;
use crate::diagnostics::{diagnose, DiagnosticsReport, Thresholds};
use crate::domain::{AteEstimate, EstimateDetail, Method, StudyDataset};
use crate::estimators::{estimate, EstimationSettings, EstimatorError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEntry {
    pub kind: &'static str,
    pub message: String,
}

impl From<&EstimatorError> for ErrorEntry {
    fn from(e: &EstimatorError) -> Self {
        Self { kind: e.kind(), message: e.to_string() }
    }
}

/// JSON entry for one estimation method: either the value with its
/// method-specific detail, or an error.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MethodOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_mean_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treated_coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_covariate_fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorEntry>,
}

impl MethodOutput {
    fn from_result(result: &Result<AteEstimate, EstimatorError>) -> Self {
        let est = match result {
            Ok(est) => est,
            Err(e) => return Self { error: Some(e.into()), ..Self::default() },
        };
        let mut out = Self { value: Some(est.value), ..Self::default() };
        match &est.detail {
            EstimateDetail::None => {}
            EstimateDetail::Interaction { intercept, theta, target_mean_x } => {
                out.intercept = Some(*intercept);
                out.theta = Some(*theta);
                out.target_mean_x = Some(*target_mean_x);
            }
            EstimateDetail::Ipsw(d) => {
                out.max_weight = Some(d.max_weight);
                out.ess = Some(d.effective_sample_size);
            }
            EstimateDetail::GFormula { treated_coefficients, control_coefficients, constant_covariate_fallback } => {
                out.treated_coefficients = Some(treated_coefficients.clone());
                out.control_coefficients = Some(control_coefficients.clone());
                out.constant_covariate_fallback = Some(*constant_covariate_fallback);
            }
        }
        out
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Meta {
    pub n: usize,
    pub m: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOutput {
    #[serde(serialize_with = "selected_only")]
    pub estimates: PerMethod<Option<MethodOutput>>,
    pub diagnostics: DiagnosticsReport,
    pub meta: Meta,
    /// Raw estimator results in `Method::ALL` order, `None` for methods not run.
    #[serde(skip)]
    pub results: PerMethod<Option<Result<AteEstimate, EstimatorError>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseOutput {
    pub diagnostics: DiagnosticsReport,
    pub meta: Meta,
}

impl EstimateOutput {
    pub fn succeeded(&self) -> usize {
        Method::ALL.iter().filter(|&&m| matches!(self.results.get(m), Some(Ok(_)))).count()
    }

    pub fn errors(&self) -> impl Iterator<Item = &EstimatorError> {
        Method::ALL.into_iter().filter_map(|m| match self.results.get(m) {
            Some(Err(e)) => Some(e),
            _ => None,
        })
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

impl DiagnoseOutput {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

fn selected_only<S: serde::Serializer>(entries: &PerMethod<Option<MethodOutput>>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(None)?;
    for m in Method::ALL {
        if let Some(entry) = entries.get(m) {
            map.serialize_entry(m.key(), entry)?;
        }
    }
    map.end()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serializes");
    out.push('\n');
    out
}

/// Runs the selected estimators and the full diagnostics on one dataset.
pub fn estimate_report(
    dataset: &StudyDataset,
    methods: &[Method],
    settings: &EstimationSettings,
    thresholds: &Thresholds,
    seed: Option<u64>,
) -> EstimateOutput {
    let results = PerMethod::from_fn(|m| methods.contains(&m).then(|| estimate(dataset, m, settings)));
    let estimates = PerMethod::from_fn(|m| results.get(m).as_ref().map(MethodOutput::from_result));
    EstimateOutput {
        estimates,
        diagnostics: diagnose(dataset, thresholds),
        meta: Meta { n: dataset.n(), m: dataset.m(), seed },
        results,
    }
}

pub fn diagnose_report(dataset: &StudyDataset, thresholds: &Thresholds, seed: Option<u64>) -> DiagnoseOutput {
    DiagnoseOutput { diagnostics: diagnose(dataset, thresholds), meta: Meta { n: dataset.n(), m: dataset.m(), seed } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate, Arm, SubjectRecord};

    #[test]
    fn minimal_dataset_reports_naive_and_transport_errors() {
        let d = validate(vec![
            SubjectRecord::trial(1.0, Arm::Treated, 3.0),
            SubjectRecord::trial(2.0, Arm::Control, 1.0),
            SubjectRecord::target(4.0),
        ])
        .unwrap();
        let out = estimate_report(&d, &Method::ALL, &EstimationSettings::default(), &Thresholds::default(), None);
        assert_eq!(out.succeeded(), 1);
        let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
        assert_eq!(json["estimates"]["naive"]["value"], 2.0);
        for key in ["interaction_ols", "ipsw", "gformula"] {
            assert_eq!(json["estimates"][key]["error"]["kind"], "DegenerateTrial", "{key}");
        }
        assert_eq!(json["meta"]["n"], 2);
        assert_eq!(json["meta"]["seed"], serde_json::Value::Null);
        assert!(json["diagnostics"]["transportable_range"].is_array());
    }

    #[test]
    fn unselected_methods_are_omitted() {
        let d =
            validate(vec![SubjectRecord::trial(1.0, Arm::Treated, 3.0), SubjectRecord::trial(2.0, Arm::Control, 1.0)])
                .unwrap();
        let out =
            estimate_report(&d, &[Method::Naive], &EstimationSettings::default(), &Thresholds::default(), Some(4));
        let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
        let keys: Vec<&String> = json["estimates"].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["naive"]);
        assert_eq!(json["estimates"]["naive"], serde_json::json!({ "value": 2.0 }));
        assert_eq!(json["meta"]["seed"], 4);
    }
}
