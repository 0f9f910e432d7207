use transport_core::numerics::{fit_logistic, fit_ols, sample_negative_binomial, RandomSource};
use transport_core::simulation::{
    calibrate_effect_scale, decay_expectation, generate_dataset, selection_probability, true_cate,
    CalibrationPopulation, SimulationConfig,
};
use transport_core::{Arm, Sample};

fn calibrated(config: SimulationConfig) -> SimulationConfig {
    config.calibrated().unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn calibration_matches_monte_carlo_expectation() {
    let mut rng = RandomSource::new(2024);
    let draws: Vec<f64> =
        (0..1_000_000).map(|_| sample_negative_binomial(10.0, 3.0, &mut rng).unwrap() as f64).collect();
    for population in [CalibrationPopulation::Full, CalibrationPopulation::Target] {
        let config = SimulationConfig { calibration_population: population, ..Default::default() };
        let (mut num, mut den) = (0.0, 0.0);
        for &x in &draws {
            let w = match population {
                CalibrationPopulation::Full => 1.0,
                CalibrationPopulation::Target => 1.0 - selection_probability(x, &config),
            };
            num += w * (-x / config.effect_decay).exp();
            den += w;
        }
        let mc = num / den;
        let exact = decay_expectation(&config).unwrap();
        assert!(((exact - mc) / mc).abs() < 0.005, "{population:?}: exact {exact}, monte carlo {mc}");
        let kappa_mc = 16.7 / mc;
        let kappa = calibrate_effect_scale(&config).unwrap();
        assert!(((kappa - kappa_mc) / kappa_mc).abs() < 0.005);
    }
}

#[test]
fn flat_selection_gives_binomial_trial_size() {
    let logit = (0.175f64 / 0.825).ln();
    let config =
        calibrated(SimulationConfig { selection_intercept: logit, selection_slope: 0.0, ..Default::default() });
    let master = RandomSource::new(5);
    let sizes: Vec<f64> =
        (0..50).map(|i| generate_dataset(&config, &mut master.substream(i)).unwrap().dataset.n() as f64).collect();
    let n = mean(&sizes);
    assert!((160.0..=190.0).contains(&n), "mean n = {n}");
}

#[test]
fn default_trial_size_is_roughly_175() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(11);
    let mut sizes = Vec::new();
    for i in 0..50 {
        let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
        assert_eq!(g.dataset.n() + g.dataset.m(), 1000);
        sizes.push(g.dataset.n() as f64);
    }
    let n = mean(&sizes);
    assert!((150.0..=200.0).contains(&n), "mean n = {n}");
}

#[test]
fn selection_depends_on_covariate() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(21);
    for i in 0..10 {
        let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
        let xs: Vec<f64> = g.dataset.records().iter().map(|r| r.x).collect();
        let labels: Vec<bool> = g.dataset.records().iter().map(|r| r.s == Sample::Trial).collect();
        let fit = fit_logistic(&xs, &labels).unwrap();
        let [b0, b1] = fit.coefficients;
        // observed Fisher information
        let (mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0);
        for &x in &xs {
            let p = 1.0 / (1.0 + (-(b0 + b1 * x)).exp());
            let w = p * (1.0 - p);
            i00 += w;
            i01 += w * x;
            i11 += w * x * x;
        }
        let se = (i00 / (i00 * i11 - i01 * i01)).sqrt();
        assert!(b1 < 0.0 && b1.abs() > 2.0 * se, "seed {i}: slope {b1}, se {se}");
    }
}

#[test]
fn conditional_effect_is_shared_by_trial_and_target() {
    let config = calibrated(SimulationConfig::default());
    let g = generate_dataset(&config, &mut RandomSource::new(8)).unwrap();
    let mut seen = std::collections::HashMap::new();
    for (r, tau) in g.dataset.records().iter().zip(&g.true_effects) {
        assert_eq!(*tau, true_cate(r.x, &config).unwrap());
        let prev = seen.entry(r.x.to_bits()).or_insert(*tau);
        assert_eq!(*prev, *tau);
    }
}

#[test]
fn positivity_holds_on_generated_subjects() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(31);
    for i in 0..10 {
        let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
        let min = g.dataset.records().iter().map(|r| selection_probability(r.x, &config)).fold(1.0, f64::min);
        assert!(min > 0.0);
    }
    for x in 0..=30 {
        assert!(selection_probability(x as f64, &config) > 1e-4);
    }
    for x in 0..=60 {
        assert!(selection_probability(x as f64, &config) > 0.0);
    }
}

#[test]
fn trial_is_less_experienced_than_target() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(41);
    let shifted = (0..50)
        .filter(|&i| {
            let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
            mean(&g.dataset.trial_covariates().collect::<Vec<_>>())
                < mean(&g.dataset.target_covariates().collect::<Vec<_>>())
        })
        .count();
    assert!(shifted >= 49, "{shifted}/50");
}

#[test]
fn no_marginal_covariate_effect_among_controls() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(51);
    let (mut rows, mut ys) = (Vec::new(), Vec::new());
    for i in 0..10 {
        let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
        for obs in g.dataset.trial().filter(|o| o.arm == Arm::Control) {
            rows.push(vec![1.0, obs.x]);
            ys.push(obs.y);
        }
    }
    let fit = fit_ols(&rows, &ys).unwrap();
    let k = rows.len() as f64;
    let sigma2 = fit.residual_sum_squares / (k - 2.0);
    let xbar = rows.iter().map(|r| r[1]).sum::<f64>() / k;
    let sxx: f64 = rows.iter().map(|r| (r[1] - xbar).powi(2)).sum();
    let se = (sigma2 / sxx).sqrt();
    assert!(fit.coefficients[1].abs() < 3.0 * se, "slope {} se {se}", fit.coefficients[1]);
}

#[test]
fn realized_target_ate_centres_on_calibration_target() {
    let config = calibrated(SimulationConfig::default());
    let master = RandomSource::new(61);
    let ates: Vec<f64> = (0..50)
        .map(|i| generate_dataset(&config, &mut master.substream(i)).unwrap().realized_target_ate().unwrap())
        .collect();
    assert!((mean(&ates) - 16.7).abs() < 0.1, "{}", mean(&ates));

    let full =
        calibrated(SimulationConfig { calibration_population: CalibrationPopulation::Full, ..Default::default() });
    let full_ates: Vec<f64> = (0..50)
        .map(|i| generate_dataset(&full, &mut master.substream(i)).unwrap().realized_target_ate().unwrap())
        .collect();
    // under full-population calibration the target-sample mean settles at κ·E[exp(−X/λ) | Target]
    let target_side = SimulationConfig { effect_scale: full.effect_scale, ..SimulationConfig::default() };
    let expected = full.effect_scale.unwrap() * decay_expectation(&target_side).unwrap();
    assert!(expected < 16.7 - 0.5, "{expected}");
    assert!((mean(&full_ates) - expected).abs() < 0.1, "{} vs {expected}", mean(&full_ates));
}
