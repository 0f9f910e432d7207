//! Replicated simulation studies, summary statistics and report rendering.

mod report;
mod svg;

pub use report::{diagnose_report, estimate_report, DiagnoseOutput, ErrorEntry, EstimateOutput, Meta, MethodOutput};
pub use svg::{render_boxplot_svg, BoxGlyph, MIN_REPLICATIONS};

use serde::Serialize;
use thiserror::Error;

use crate::domain::Method;
use crate::estimators::{estimate, EstimationSettings, EstimatorError, PropensityPolicy};
use crate::numerics::RandomSource;
use crate::simulation::{generate_dataset, SimulationConfig, SimulationError};

/// Re-draws allowed per replication slot after the first attempt.
pub const MAX_RETRIES: u64 = 3;
const RETRY_STRIDE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("replication {slot} failed after {attempts} attempts: {last}")]
    ReplicationFailed { slot: usize, attempts: u64, last: EstimatorError },
    #[error("box plot needs at least {needed} replications, got {got}")]
    InsufficientReplications { needed: usize, got: usize },
}

/// One value per estimation method, in the fixed reporting order.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct PerMethod<T> {
    pub naive: T,
    pub interaction_ols: T,
    pub ipsw: T,
    pub gformula: T,
}

impl<T> PerMethod<T> {
    pub fn from_fn(mut f: impl FnMut(Method) -> T) -> Self {
        Self {
            naive: f(Method::Naive),
            interaction_ols: f(Method::InteractionOls),
            ipsw: f(Method::Ipsw),
            gformula: f(Method::GFormula),
        }
    }

    pub fn get(&self, method: Method) -> &T {
        match method {
            Method::Naive => &self.naive,
            Method::InteractionOls => &self.interaction_ols,
            Method::Ipsw => &self.ipsw,
            Method::GFormula => &self.gformula,
        }
    }

    pub fn get_mut(&mut self, method: Method) -> &mut T {
        match method {
            Method::Naive => &mut self.naive,
            Method::InteractionOls => &mut self.interaction_ols,
            Method::Ipsw => &mut self.ipsw,
            Method::GFormula => &mut self.gformula,
        }
    }
}

/// Type-7 quantile (linear interpolation between order statistics) of
/// already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    match sorted.get(lo + 1) {
        Some(next) => sorted[lo] + (h - lo as f64) * (next - sorted[lo]),
        None => sorted[lo],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    /// Indexed by replication slot.
    pub estimates: Vec<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    pub min: f64,
    pub max: f64,
}

impl MethodSummary {
    pub fn new(estimates: Vec<f64>, true_tau: f64) -> Self {
        let mut sorted = estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let k = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / k;
        let rmse = (estimates.iter().map(|e| (e - true_tau).powi(2)).sum::<f64>() / k).sqrt();
        Self {
            median: quantile_sorted(&sorted, 0.5),
            q25: quantile_sorted(&sorted, 0.25),
            q75: quantile_sorted(&sorted, 0.75),
            mean,
            bias: mean - true_tau,
            rmse,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            estimates,
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetryEvent {
    pub slot: usize,
    pub attempt: u64,
    pub substream: u64,
    pub method: Option<Method>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub true_tau: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub effect_scale: f64,
    pub per_method: PerMethod<MethodSummary>,
    pub trial_sizes: Vec<usize>,
    /// Mean over replications of the realized target-sample average of τ(x).
    pub mean_realized_target_ate: f64,
    pub retries: Vec<RetryEvent>,
    pub config: SimulationConfig,
}

/// The four estimates from one generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub estimates: PerMethod<f64>,
    pub trial_size: usize,
    pub realized_target_ate: f64,
}

/// Why one simulate-and-estimate cycle failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    /// `None` when the dataset itself could not be generated.
    pub method: Option<Method>,
    pub error: EstimatorError,
}

/// Generates one dataset from `rng` and applies every estimator.
pub fn run_single(config: &SimulationConfig, rng: &mut RandomSource) -> Result<SingleRun, RunFailure> {
    let study = generate_dataset(config, rng).map_err(|e| RunFailure {
        method: None,
        error: match e {
            SimulationError::Dataset(d) => EstimatorError::DegenerateTrial(d.to_string()),
            other => EstimatorError::InvalidParameter(other.to_string()),
        },
    })?;
    let policy = PropensityPolicy::new(config.propensity).map_err(|error| RunFailure { method: None, error })?;
    let settings = EstimationSettings { policy, basis_degree: 1 };
    let mut estimates = PerMethod::<f64>::default();
    for method in Method::ALL {
        let est =
            estimate(&study.dataset, method, &settings).map_err(|error| RunFailure { method: Some(method), error })?;
        *estimates.get_mut(method) = est.value;
    }
    let realized_target_ate =
        study.realized_target_ate().ok_or(RunFailure { method: None, error: EstimatorError::NoTargetRecords })?;
    Ok(SingleRun { estimates, trial_size: study.dataset.n(), realized_target_ate })
}

/// Substream index of retry `attempt` for replication `slot`.
pub fn attempt_substream(slot: usize, attempt: u64) -> u64 {
    slot as u64 + attempt * RETRY_STRIDE
}

fn run_slot(
    config: &SimulationConfig,
    master: &RandomSource,
    slot: usize,
) -> (Result<SingleRun, HarnessError>, Vec<RetryEvent>) {
    let mut log = Vec::new();
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let substream = attempt_substream(slot, attempt);
        match run_single(config, &mut master.substream(substream)) {
            Ok(run) => return (Ok(run), log),
            Err(failure) => {
                log.push(RetryEvent {
                    slot,
                    attempt,
                    substream,
                    method: failure.method,
                    error: failure.error.to_string(),
                });
                last = Some(failure.error);
            }
        }
    }
    let err =
        HarnessError::ReplicationFailed { slot, attempts: MAX_RETRIES + 1, last: last.expect("at least one attempt") };
    (Err(err), log)
}

/// Runs `replications` independent simulate-and-estimate cycles. Slot `i`
/// uses substream `i` of `master_seed`; failed slots are re-drawn on fresh
/// substreams up to [`MAX_RETRIES`] times. `threads = 0` uses all available
/// cores. The result does not depend on `threads`.
pub fn run_replications(
    config: &SimulationConfig,
    replications: usize,
    master_seed: u64,
    threads: usize,
) -> Result<ReplicationSummary, HarnessError> {
    if replications == 0 {
        return Err(HarnessError::InvalidArgument("replications must be at least 1".into()));
    }
    let config = config.clone().calibrated()?;
    let master = RandomSource::new(master_seed);
    let threads = match threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(replications);

    let mut outcomes: Vec<(usize, Result<SingleRun, HarnessError>, Vec<RetryEvent>)> = if threads == 1 {
        (0..replications)
            .map(|slot| {
                let (r, log) = run_slot(&config, &master, slot);
                (slot, r, log)
            })
            .collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let (config, master) = (&config, &master);
                    scope.spawn(move || {
                        (t..replications)
                            .step_by(threads)
                            .map(|slot| {
                                let (r, log) = run_slot(config, master, slot);
                                (slot, r, log)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("replication worker panicked")).collect()
        })
    };
    outcomes.sort_by_key(|(slot, _, _)| *slot);

    let mut runs = Vec::with_capacity(replications);
    let mut retries = Vec::new();
    for (_, result, log) in outcomes {
        retries.extend(log);
        runs.push(result?);
    }
    let true_tau = config.target_ate;
    let per_method =
        PerMethod::from_fn(|m| MethodSummary::new(runs.iter().map(|r| *r.estimates.get(m)).collect(), true_tau));
    Ok(ReplicationSummary {
        true_tau,
        replications,
        master_seed,
        effect_scale: config.effect_scale.expect("calibrated"),
        per_method,
        trial_sizes: runs.iter().map(|r| r.trial_size).collect(),
        mean_realized_target_ate: runs.iter().map(|r| r.realized_target_ate).sum::<f64>() / replications as f64,
        retries,
        config,
    })
}

impl ReplicationSummary {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("summary serializes");
        out.push('\n');
        out
    }
}
