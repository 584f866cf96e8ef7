use proptest::prelude::*;
use survkan_core::{
    concordance_index, generate, invert_standardization, standardize, stratified_split, GeneratorSpec, SyntheticFormula,
};

fn event_rate(d: &[bool]) -> f64 {
    d.iter().filter(|e| **e).count() as f64 / d.len() as f64
}

#[test]
fn named_formulas_censor_some_but_not_all() {
    for f in [SyntheticFormula::Gaussian, SyntheticFormula::Shallow, SyntheticFormula::Deep, SyntheticFormula::Difficult] {
        let (train, test) = generate(&GeneratorSpec::new(f.clone(), 8000, 2000, 1)).unwrap();
        let d: Vec<bool> = train.outcome.events().iter().chain(test.outcome.events()).copied().collect();
        let rate = event_rate(&d);
        assert!(rate > 0.0 && rate < 1.0, "{f:?}: event rate {rate}");
    }
}

#[test]
fn null_hazard_has_mean_one_over_baseline() {
    let mut spec = GeneratorSpec::new(SyntheticFormula::from_name("custom:0*x1").unwrap(), 50_000, 50_000, 2);
    spec.censoring = false;
    let (train, test) = generate(&spec).unwrap();
    let all: Vec<f64> = train.outcome.durations().iter().chain(test.outcome.durations()).copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    assert!((mean - 100.0).abs() < 5.0, "mean {mean}");
    assert!(train.outcome.events().iter().all(|e| *e));
}

#[test]
fn true_risk_matches_the_closed_form() {
    let (train, _) = generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 500, 10, 3)).unwrap();
    let theta = train.true_theta().unwrap();
    for r in 0..500 {
        let (a, b) = (train.x.get(r, 0), train.x.get(r, 1));
        assert!((theta[r] - 5.0 * (-2.0 * (a * a + b * b)).exp()).abs() < 1e-12);
    }
    assert_eq!(train.names(), ["x1", "x2", "eps1", "eps2"]);
}

#[test]
fn gaussian_true_risk_concordance() {
    let (_, test) = generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 8000, 2000, 7)).unwrap();
    let c = concordance_index(test.true_theta().unwrap(), &test.outcome).unwrap();
    assert!((0.75..=0.77).contains(&c), "C {c}");
}

#[test]
fn difficult_uses_positive_log_range() {
    let (train, _) = generate(&GeneratorSpec::new(SyntheticFormula::Difficult, 2000, 10, 4)).unwrap();
    assert!(train.x.column(0).iter().all(|v| (0.1..1.0).contains(v)));
    assert!(train.x.column(1).iter().all(|v| (-1.0..1.0).contains(v)));
}

#[test]
fn generation_is_seeded() {
    let spec = GeneratorSpec::new(SyntheticFormula::Shallow, 300, 100, 9);
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    let other = GeneratorSpec { seed: 10, ..spec.clone() };
    assert_ne!(generate(&spec).unwrap().0.x, generate(&other).unwrap().0.x);
}

#[test]
fn bad_specs_are_rejected() {
    assert!(generate(&GeneratorSpec::new(SyntheticFormula::Gaussian, 0, 10, 1)).is_err());
    let spec = GeneratorSpec { baseline: 0.0, ..GeneratorSpec::new(SyntheticFormula::Gaussian, 10, 10, 1) };
    assert!(generate(&spec).is_err());
    let spec = GeneratorSpec { ranges: Some(vec![[0.0, 1.0]]), ..GeneratorSpec::new(SyntheticFormula::Gaussian, 10, 10, 1) };
    assert!(generate(&spec).is_err());
    assert!(SyntheticFormula::from_name("quadratic").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn stratified_split_keeps_event_rate(seed in any::<u64>(), frac in 0.1..0.4f64) {
        let (ds, _) = generate(&GeneratorSpec::new(SyntheticFormula::Shallow, 1000, 10, seed)).unwrap();
        let (train, test) = stratified_split(&ds, frac, 5, seed).unwrap();
        prop_assert_eq!(train.rows() + test.rows(), 1000);
        // one rounding per bucket: 2 event flags × 5 bins
        prop_assert!((test.rows() as f64 - 1000.0 * frac).abs() <= 10.0);
        let overall = event_rate(ds.outcome.events());
        prop_assert!((event_rate(test.outcome.events()) - overall).abs() < 0.02);
        prop_assert!((event_rate(train.outcome.events()) - overall).abs() < 0.02);
    }

    #[test]
    fn standardization_round_trips(seed in any::<u64>()) {
        let (ds, _) = generate(&GeneratorSpec::new(SyntheticFormula::Deep, 200, 10, seed)).unwrap();
        let z = standardize(&ds);
        for c in 0..z.cols() {
            let col = z.x.column(c);
            let mean = col.iter().sum::<f64>() / 200.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 199.0;
            prop_assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-10);
        }
        let back = invert_standardization(&z);
        for r in 0..200 {
            for c in 0..ds.cols() {
                prop_assert!((back.x.get(r, c) - ds.x.get(r, c)).abs() < 1e-12);
            }
        }
    }
}
