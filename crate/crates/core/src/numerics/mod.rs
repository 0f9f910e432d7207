//! Numerical kernels: seeded random source, samplers, least squares and
//! logistic regression.

mod logistic;
mod ols;
mod rng;
mod sampling;

pub use logistic::{
    fit_logistic, fit_logistic_with, log_likelihood, predict_probability, score, LogisticFit, LogisticOptions,
};
pub use ols::{fit_ols, fit_polynomial, polynomial_basis, LinearFit};
pub use rng::RandomSource;
pub use sampling::{
    ln_gamma, sample_bernoulli, sample_gamma, sample_negative_binomial, sample_normal, sample_poisson, standard_normal,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("all labels are identical")]
    DegenerateLabels,
    #[error("logistic fit did not produce a finite maximum ({reason})")]
    Separation { reason: String },
}
