use memwalk::montecarlo::{cross_time_covariance, run_ensemble, EnsembleConfig};
use memwalk::theory::{classify_regime, diffusive_covariance, Regime};
use memwalk::{InitialSpec, ModelParams};

fn trace_ratio(m: &ModelParams, reps: u64, seed: u64, scale: impl Fn(f64) -> f64) -> f64 {
    let cfg = EnsembleConfig::new(10_000, reps, seed).checkpoints(vec![1000, 10_000]);
    let s = run_ensemble(m, &InitialSpec::Uniform, &cfg).unwrap();
    let at = |i: usize| {
        let c = &s.checkpoints[i];
        c.cov.trace() / scale(c.n as f64)
    };
    at(1) / at(0)
}

#[test]
fn diffusive_variance_is_linear() {
    let grid = [
        ModelParams::new(1, false, 0.6, 1.0).unwrap(),
        ModelParams::new(2, false, 0.5, 0.5).unwrap(),
        ModelParams::new(1, true, 0.5, 1.0).unwrap(),
        ModelParams::new(1, false, 0.7, 0.0).unwrap(),
    ];
    for (i, m) in grid.iter().enumerate() {
        assert!(classify_regime(m).is_diffusive());
        let ratio = trace_ratio(m, 10_000, 100 + i as u64, |n| n);
        assert!((ratio - 1.0).abs() < 0.10, "{m:?}: {ratio}");
    }
}

#[test]
fn critical_variance_has_log_correction() {
    let m = ModelParams::new(2, false, 0.625, 1.0).unwrap();
    assert_eq!(classify_regime(&m), Regime::Critical);
    let ratio = trace_ratio(&m, 10_000, 7, |n| n * n.ln());
    assert!((ratio - 1.0).abs() < 0.15, "{ratio}");
}

#[test]
fn worker_count_does_not_change_results() {
    let m = ModelParams::new(2, true, 0.55, 0.7).unwrap();
    let cfg = EnsembleConfig::new(2000, 500, 99).checkpoints(vec![10, 100, 2000]);
    let base = run_ensemble(&m, &InitialSpec::Fixed(3), &cfg).unwrap();
    for w in [1, 2, 4] {
        let other = run_ensemble(&m, &InitialSpec::Fixed(3), &cfg.clone().workers(Some(w))).unwrap();
        assert_eq!(base, other);
    }
}

#[test]
fn cross_time_matches_theory() {
    let m = ModelParams::new(1, false, 0.6, 1.0).unwrap();
    let est = cross_time_covariance(&m, &InitialSpec::Uniform, 1.0, 4.0, 2000, 10_000, 5, None).unwrap();
    let want = diffusive_covariance(&m, 1.0, 4.0).unwrap();
    let z = (est.cross[(0, 0)] - want[(0, 0)]).abs() / est.cross_se[(0, 0)];
    assert!(z < 4.0, "{} vs {} ({z} SE)", est.cross[(0, 0)], want[(0, 0)]);
}
