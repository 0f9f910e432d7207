use proptest::prelude::*;
use transport_core::diagnostics::{
    check_positivity, check_support, covariate_shift_smd, diagnose, weight_health, Thresholds,
};
use transport_core::numerics::RandomSource;
use transport_core::simulation::{generate_dataset, SimulationConfig};
use transport_core::{validate, Arm, IpswDetail, StudyDataset, SubjectRecord};

fn dataset(trial: &[f64], target: &[f64]) -> StudyDataset {
    let mut records: Vec<SubjectRecord> = trial
        .iter()
        .enumerate()
        .map(|(i, &x)| SubjectRecord::trial(x, if i % 2 == 0 { Arm::Treated } else { Arm::Control }, i as f64))
        .collect();
    records.extend(target.iter().map(|&x| SubjectRecord::target(x)));
    validate(records).unwrap()
}

fn adversarial() -> StudyDataset {
    let trial: Vec<f64> = (0..40).map(|i| (i % 5) as f64).collect();
    let target: Vec<f64> = (0..200).map(|i| (i % 51) as f64).collect();
    dataset(&trial, &target)
}

#[test]
fn adversarial_dataset_is_flagged() {
    let d = adversarial();
    let support = check_support(&d).unwrap();
    assert!(support.out_of_support_fraction > 0.3, "{}", support.out_of_support_fraction);
    let positivity = check_positivity(&d, &Thresholds::default()).unwrap();
    assert!(positivity.warning, "min eligibility {}", positivity.min_eligibility);
    let report = diagnose(&d, &Thresholds::default());
    assert!(report.warnings.iter().any(|w| w.starts_with("positivity:")));
}

#[test]
fn default_simulation_diagnostics() {
    let config = SimulationConfig::default().calibrated().unwrap();
    let master = RandomSource::new(77);
    let mut positive = 0;
    for i in 0..50 {
        let g = generate_dataset(&config, &mut master.substream(i)).unwrap();
        let report = diagnose(&g.dataset, &Thresholds::default());
        if report.smd.unwrap() > 0.0 {
            positive += 1;
        }
        assert!(report.min_eligibility.unwrap() > 0.0);
        let max_trial = g.dataset.trial_covariates().fold(f64::NEG_INFINITY, f64::max);
        let max_target = g.dataset.target_covariates().fold(f64::NEG_INFINITY, f64::max);
        if max_target >= max_trial {
            assert_eq!(report.transportable_range.unwrap()[1], max_trial);
        }
    }
    assert!(positive >= 49, "{positive}/50");
}

fn covariates(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..60.0f64, len)
}

proptest! {
    #[test]
    fn smd_is_antisymmetric(trial in covariates(2..20), target in covariates(2..20)) {
        let forward = covariate_shift_smd(&dataset(&trial, &target));
        let backward = covariate_shift_smd(&dataset(&target, &trial));
        if let (Ok(f), Ok(b)) = (forward, backward) {
            prop_assert!((f + b).abs() <= 1e-12 * (1.0 + f.abs()), "{} vs {}", f, b);
        }
    }

    #[test]
    fn smd_affine_behaviour(trial in covariates(2..20), target in covariates(2..20), a in 0.1..5.0f64, b in 0.0..10.0f64) {
        let Ok(base) = covariate_shift_smd(&dataset(&trial, &target)) else { return Ok(()) };
        let map = |v: &[f64], s: f64, c: f64| v.iter().map(|x| s * x + c).collect::<Vec<_>>();
        let up = covariate_shift_smd(&dataset(&map(&trial, a, b), &map(&target, a, b))).unwrap();
        prop_assert!((up - base).abs() <= 1e-9 * (1.0 + base.abs()));
        // negative scale, shifted to keep covariates non-negative
        let down = covariate_shift_smd(&dataset(&map(&trial, -a, 60.0 * a), &map(&target, -a, 60.0 * a))).unwrap();
        prop_assert!((down + base).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn ess_bounds(weights in prop::collection::vec(1e-3..1e3f64, 1..60)) {
        let n = weights.len() as f64;
        let h = weight_health(&IpswDetail::from_weights(weights), &Thresholds::default());
        prop_assert!(h.effective_sample_size >= 1.0 - 1e-12 && h.effective_sample_size <= n + 1e-9);
    }

    #[test]
    fn ess_equals_n_only_for_equal_weights(w in 1e-3..1e3f64, n in 2usize..60, bump in 1.01..3.0f64) {
        let equal = IpswDetail::from_weights(vec![w; n]);
        prop_assert!((equal.effective_sample_size - n as f64).abs() < 1e-9);
        let mut unequal = vec![w; n];
        unequal[0] *= bump;
        prop_assert!(IpswDetail::from_weights(unequal).effective_sample_size < n as f64 - 1e-9);
    }

    #[test]
    fn support_is_permutation_invariant(trial in covariates(2..15), target in covariates(1..15), seed in any::<u64>()) {
        let d = dataset(&trial, &target);
        let mut records = d.records().to_vec();
        let mut rng = RandomSource::new(seed);
        for i in (1..records.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            records.swap(i, j);
        }
        let shuffled = validate(records).unwrap();
        prop_assert_eq!(check_support(&d).unwrap(), check_support(&shuffled).unwrap());
    }
}
