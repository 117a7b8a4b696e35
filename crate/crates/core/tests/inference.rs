use runevt::inference::{bootstrap, BootstrapConfig};
use runevt::paper::{paper_model, DISCIPLINES};
use runevt::simgen::{simulate, CounterRng, SimConfig};
use runevt::{aic, fit, ExceedanceSet, FitConfig, GlobalModel, YearRange};

fn data(model: &GlobalModel, seed: u64) -> Vec<ExceedanceSet> {
    simulate(&SimConfig {
        model: model.clone(),
        horizon: YearRange::new(2001, 2019).unwrap(),
        seed,
        athlete_pool: None,
    })
    .unwrap()
    .sets
}

fn quick() -> FitConfig {
    FitConfig {
        starts: 2,
        ..FitConfig::default()
    }
}

#[test]
fn recovers_location_and_shape() {
    let truth = paper_model();
    let fitted = fit(&data(&truth, 21), &FitConfig::default()).unwrap();
    assert!(fitted.converged);
    assert!((fitted.model.xi - truth.xi).abs() < 0.08, "{}", fitted.model.xi);
    for (d, _) in DISCIPLINES {
        let (a, b) = (&fitted.model.disciplines[d], &truth.disciplines[d]);
        assert!((a.mu0 - b.mu0).abs() < 3.0 * b.sigma0, "{d} mu0 {} vs {}", a.mu0, b.mu0);
        assert!((a.beta - b.beta).abs() < 0.5 * b.sigma0, "{d} beta");
    }
}

#[test]
fn input_order_does_not_matter() {
    let mut sets = data(&paper_model(), 5);
    let a = fit(&sets, &quick()).unwrap();
    sets.reverse();
    for s in &mut sets {
        s.observations.reverse();
    }
    let b = fit(&sets, &quick()).unwrap();
    assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-6);
    assert!((a.model.xi - b.model.xi).abs() < 1e-4);
}

#[test]
fn refit_from_estimate_stays_put() {
    let sets = data(&paper_model(), 8);
    let a = fit(&sets, &FitConfig::default()).unwrap();
    let warm = FitConfig {
        starts: 1,
        init: runevt::inference::InitStrategy::Warm { model: a.model.clone() },
        ..FitConfig::default()
    };
    let b = fit(&sets, &warm).unwrap();
    assert!(b.log_likelihood >= a.log_likelihood - 1e-4);
    assert!((a.model.xi - b.model.xi).abs() < 2e-3);
}

#[test]
fn nested_models_and_likelihood_ratio() {
    let mut truth = paper_model();
    for p in truth.disciplines.values_mut() {
        p.gamma = 0.0;
    }
    let reduced_cfg = FitConfig { gamma: false, ..quick() };
    let reps = 20;
    let mut lr_sum = 0.0;
    let mut reduced_wins = 0;
    for i in 0..reps {
        let sets = data(&truth, CounterRng::derive(0x1E57, i));
        let full = fit(&sets, &quick()).unwrap();
        let reduced = fit(&sets, &reduced_cfg).unwrap();
        assert_eq!(full.parameter_count - reduced.parameter_count, 6);
        assert!(reduced.model.disciplines.values().all(|p| p.gamma == 0.0));
        let lr = 2.0 * (full.log_likelihood - reduced.log_likelihood);
        assert!(lr > -1e-3, "full fit below nested fit: {lr}");
        lr_sum += lr;
        reduced_wins += usize::from(aic(&reduced) < aic(&full));
    }
    // chi-square with 6 degrees of freedom under the null
    let mean = lr_sum / reps as f64;
    assert!((3.5..=9.0).contains(&mean), "mean LR {mean}");
    assert!(reduced_wins >= 12, "{reduced_wins}");
}

#[test]
fn footwear_effect_is_detected() {
    let truth = paper_model();
    let sets = data(&truth, 77);
    let full = fit(&sets, &quick()).unwrap();
    let reduced = fit(&sets, &FitConfig { gamma: false, ..quick() }).unwrap();
    assert!(aic(&full) < aic(&reduced));
}

#[test]
fn bootstrap_is_deterministic() {
    let sets = data(&paper_model(), 3);
    let fitted = fit(&sets, &quick()).unwrap();
    let cfg = BootstrapConfig {
        replicates: 50,
        seed: 11,
        ..BootstrapConfig::default()
    };
    let a = bootstrap(&fitted, &sets, &cfg).unwrap();
    let b = bootstrap(&fitted, &sets, &cfg).unwrap();
    assert_eq!(a.replicates.len(), 50);
    let ia = a.parameter_intervals(0.95);
    let ib = b.parameter_intervals(0.95);
    assert_eq!(ia.len(), 31);
    for (x, y) in ia.iter().zip(&ib) {
        assert_eq!(x.interval, y.interval);
        assert!(x.interval.lower <= x.interval.upper);
    }
    for p in a.parameter_intervals(0.0) {
        assert_eq!(p.interval.lower, p.estimate);
        assert_eq!(p.interval.upper, p.estimate);
    }
}
