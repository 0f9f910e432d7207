//! Transporting randomized-trial treatment effects to a target population.
//!
//! The crate is organised around the [`domain::StudyDataset`]: trial subjects
//! with covariate, arm and outcome, and target subjects with the covariate
//! only. [`estimators`] turns a dataset into average-treatment-effect
//! estimates, [`simulation`] generates datasets from a known causal model,
//! [`diagnostics`] checks overlap and weight health, and [`harness`] runs
//! replicated simulation studies and renders their results.

pub mod codec;
pub mod diagnostics;
pub mod domain;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod simulation;

pub use codec::{parse_csv, serialize_csv};
pub use domain::{
    validate, Arm, AteEstimate, DomainError, EstimateDetail, IpswDetail, Method, Sample, StudyDataset, SubjectRecord,
};
