use super::NumericsError;

/// Convergence and safety constants for [`fit_logistic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Stop once every Newton update is below this in absolute value.
    pub coefficient_tolerance: f64,
    /// Stop once the score max-norm is below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Largest admissible |coefficient| on the standardized feature scale.
    pub separation_bound: f64,
    /// Predicted probabilities are clipped into `[clip, 1 - clip]`.
    pub probability_clip: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            coefficient_tolerance: 1e-10,
            gradient_tolerance: 1e-8,
            max_iterations: 100,
            separation_bound: 30.0,
            probability_clip: 1e-6,
        }
    }
}

/// Intercept-plus-slope logistic model `P(label = 1 | x) = sigmoid(b0 + b1·x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub coefficients: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    pub probability_clip: f64,
}

impl LogisticFit {
    pub fn probability(&self, x: f64) -> f64 {
        predict_probability(self, x)
    }

    /// Odds p/(1-p) of the clipped probability.
    pub fn odds(&self, x: f64) -> f64 {
        let p = self.probability(x);
        p / (1.0 - p)
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^eta) without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

pub fn predict_probability(fit: &LogisticFit, x: f64) -> f64 {
    let eps = fit.probability_clip;
    sigmoid(fit.coefficients[0] + fit.coefficients[1] * x).clamp(eps, 1.0 - eps)
}

/// Bernoulli log-likelihood at `coefficients` (unclipped).
pub fn log_likelihood(coefficients: [f64; 2], features: &[f64], labels: &[bool]) -> f64 {
    features
        .iter()
        .zip(labels)
        .map(|(&x, &l)| {
            let eta = coefficients[0] + coefficients[1] * x;
            if l {
                eta - softplus(eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Gradient of [`log_likelihood`]: (Σ(label − p), Σ x·(label − p)).
pub fn score(coefficients: [f64; 2], features: &[f64], labels: &[bool]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (&x, &l) in features.iter().zip(labels) {
        let r = f64::from(u8::from(l)) - sigmoid(coefficients[0] + coefficients[1] * x);
        g[0] += r;
        g[1] += r * x;
    }
    g
}

pub fn fit_logistic(features: &[f64], labels: &[bool]) -> Result<LogisticFit, NumericsError> {
    fit_logistic_with(features, labels, &LogisticOptions::default())
}

/// Newton-Raphson on the standardized feature, with step halving whenever
/// a full step would lower the likelihood.
///
/// Non-overlapping classes, divergence past `separation_bound` and running
/// out of iterations are all reported as [`NumericsError::Separation`]: the
/// data carry no finite maximum likelihood estimate, or too little
/// information to pin one down.
pub fn fit_logistic_with(
    features: &[f64],
    labels: &[bool],
    options: &LogisticOptions,
) -> Result<LogisticFit, NumericsError> {
    let n = features.len();
    if n != labels.len() {
        return Err(NumericsError::DimensionMismatch(format!("{n} features vs {} labels", labels.len())));
    }
    if n < 2 {
        return Err(NumericsError::InvalidParameter("logistic regression needs at least 2 observations".into()));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::InvalidParameter("non-finite feature".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == n {
        return Err(NumericsError::DegenerateLabels);
    }
    let nf = n as f64;
    let base_rate = positives as f64 / nf;
    let base_logit = (base_rate / (1.0 - base_rate)).ln();

    let mean = features.iter().sum::<f64>() / nf;
    let sd = (features.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let fit = |coefficients, converged, iterations| LogisticFit {
        coefficients,
        converged,
        iterations,
        probability_clip: options.probability_clip,
    };
    if sd == 0.0 || !sd.is_finite() {
        return Ok(fit([base_logit, 0.0], true, 0));
    }
    if let Some(reason) = separated(features, labels) {
        return Err(NumericsError::Separation { reason });
    }
    let z: Vec<f64> = features.iter().map(|x| (x - mean) / sd).collect();

    let mut beta = [base_logit, 0.0];
    let mut ll = log_likelihood(beta, &z, labels);
    for iteration in 0..options.max_iterations {
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (&zi, &l) in z.iter().zip(labels) {
            let p = sigmoid(beta[0] + beta[1] * zi);
            let r = f64::from(u8::from(l)) - p;
            let w = p * (1.0 - p);
            g[0] += r;
            g[1] += r * zi;
            h[0] += w;
            h[1] += w * zi;
            h[2] += w * zi * zi;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        if !(det > 0.0 && det.is_finite()) {
            return Err(NumericsError::Separation {
                reason: format!("singular information matrix at iteration {iteration}"),
            });
        }
        let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
        if g[0].abs().max(g[1].abs()) < options.gradient_tolerance {
            // one last full Newton step polishes the estimate
            let polished = [beta[0] + step[0], beta[1] + step[1]];
            return Ok(fit(unstandardize(polished, mean, sd), true, iteration + 1));
        }

        let mut t = 1.0;
        let mut candidate;
        let mut candidate_ll;
        loop {
            candidate = [beta[0] + t * step[0], beta[1] + t * step[1]];
            candidate_ll = log_likelihood(candidate, &z, labels);
            if candidate_ll >= ll - 1e-12 * ll.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        beta = candidate;
        ll = candidate_ll;
        if beta[0].abs().max(beta[1].abs()) > options.separation_bound {
            return Err(NumericsError::Separation {
                reason: format!("|coefficient| exceeded {} on the standardized scale", options.separation_bound),
            });
        }
        if (t * step[0]).abs().max((t * step[1]).abs()) < options.coefficient_tolerance {
            return Ok(fit(unstandardize(beta, mean, sd), true, iteration + 1));
        }
    }
    Err(NumericsError::Separation { reason: format!("no convergence within {} iterations", options.max_iterations) })
}

/// With one feature, the MLE is infinite exactly when the two label
/// classes occupy ranges that overlap in at most one point.
fn separated(features: &[f64], labels: &[bool]) -> Option<String> {
    let range = |class: bool| {
        features
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, _)| (lo.min(x), hi.max(x)))
    };
    let (lo0, hi0) = range(false);
    let (lo1, hi1) = range(true);
    if hi0 <= lo1 || hi1 <= lo0 {
        Some(format!("label classes do not overlap (0: [{lo0}, {hi0}], 1: [{lo1}, {hi1}])"))
    } else {
        None
    }
}

fn unstandardize(beta: [f64; 2], mean: f64, sd: f64) -> [f64; 2] {
    let slope = beta[1] / sd;
    [beta[0] - slope * mean, slope]
}
