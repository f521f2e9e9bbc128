mod common;

use std::f64::consts::PI;

use common::*;
use histories_core::builtins::{epr, larmor};
use histories_core::engine::{HistoryDistribution, HistoryEngine, Strategy};
use histories_core::sampler::{chi_square_between, chi_square_critical, conditional_sample, sample};
use histories_core::Error;

fn distribution(engine: &HistoryEngine) -> HistoryDistribution {
    engine.full_distribution(Strategy::ProjectedPropagator).unwrap()
}

/// Root-mean-square deviation of sampled frequencies from the exact law,
/// averaged over `seeds` runs.
fn rms_error(dist: &HistoryDistribution, n: u64, seeds: u64) -> f64 {
    let mut sum = 0.0;
    for seed in 0..seeds {
        let r = sample(dist, n, seed).unwrap();
        let counts = r.dense_counts(dist);
        for (c, p) in counts.iter().zip(dist.probabilities()) {
            sum += (*c as f64 / n as f64 - p).powi(2);
        }
    }
    (sum / seeds as f64).sqrt()
}

#[test]
fn larmor_quarter_turn_frequency() {
    let e = HistoryEngine::new(larmor(1.0, PI / 4.0).unwrap()).unwrap();
    let d = distribution(&e);
    let r = sample(&d, 100_000, 2024).unwrap();
    let k = d.eigenvalues()[1].iter().position(|v| *v == 1.0).unwrap();
    let f = r.frequency(&[k, k]);
    assert!((f - 0.5).abs() < 0.0047, "{f}");
    assert_eq!(r.total(), 100_000);
}

#[test]
fn same_seed_gives_identical_reports() {
    let e = HistoryEngine::new(epr(0.2, 1.1).unwrap()).unwrap();
    let d = distribution(&e);
    assert_eq!(sample(&d, 5000, 11).unwrap().to_json(), sample(&d, 5000, 11).unwrap().to_json());
    assert_eq!(
        conditional_sample(&e, 5000, 11).unwrap().to_json(),
        conditional_sample(&e, 5000, 11).unwrap().to_json()
    );
}

#[test]
fn zero_probability_strings_are_never_drawn() {
    let e = HistoryEngine::new(epr(0.7, 0.7).unwrap()).unwrap();
    let d = distribution(&e);
    for r in [sample(&d, 20_000, 3).unwrap(), conditional_sample(&e, 20_000, 3).unwrap()] {
        for k in 0..2 {
            assert_eq!(r.count(&[k, k]), 0);
        }
        assert_eq!(r.total(), 20_000);
    }
}

#[test]
fn single_measurement_conditional_matches_direct() {
    let e = HistoryEngine::new(larmor(1.0, 0.3).unwrap().truncated(1)).unwrap();
    let a = sample(&distribution(&e), 1000, 5).unwrap();
    let b = conditional_sample(&e, 1000, 5).unwrap();
    assert_eq!(a.entries, b.entries);
}

#[test]
fn zero_samples_is_rejected() {
    let e = HistoryEngine::new(epr(0.0, 1.0).unwrap()).unwrap();
    assert!(matches!(sample(&distribution(&e), 0, 1), Err(Error::Precondition(_))));
    assert!(conditional_sample(&e, 0, 1).is_err());
}

#[test]
fn random_scenarios_pass_goodness_of_fit() {
    let mut r = rng(404);
    for (i, kind) in PREP_KINDS.iter().enumerate() {
        let e = HistoryEngine::new(random_scenario(&mut r, 3, 3, *kind)).unwrap();
        let d = distribution(&e);
        let report = sample(&d, 10_000, 100 + i as u64).unwrap();
        let limit = chi_square_critical(report.degrees_of_freedom, 0.001);
        assert!(report.chi_square < limit, "{} >= {limit}", report.chi_square);
    }
}

#[test]
fn error_shrinks_as_inverse_square_root() {
    let e = HistoryEngine::new(epr(0.3, 1.4).unwrap()).unwrap();
    let d = distribution(&e);
    let ratio = rms_error(&d, 1_000, 30) / rms_error(&d, 100_000, 30);
    assert!((5.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn both_methods_draw_from_the_same_law() {
    let e = HistoryEngine::new(epr(0.2, 1.1).unwrap()).unwrap();
    let d = distribution(&e);
    let trials = 1000u64;
    let mut rejected = 0;
    for t in 0..trials {
        let a = sample(&d, 2000, 2 * t).unwrap().dense_counts(&d);
        let b = conditional_sample(&e, 2000, 2 * t + 1).unwrap().dense_counts(&d);
        let (stat, df) = chi_square_between(&a, &b);
        if stat > chi_square_critical(df, 0.001) {
            rejected += 1;
        }
    }
    assert!((rejected as f64) < 0.005 * trials as f64, "{rejected} rejections");
}
