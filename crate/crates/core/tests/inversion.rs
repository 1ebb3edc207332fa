use degen_core::inversion::{gradient, minimize, Bounds};
use degen_core::observations::{add_noise, NoiseSpec};
use degen_core::presets::Preset;
use degen_core::InverseProblemSpec;
use proptest::prelude::*;

/// Preset on a coarse grid so property runs stay cheap.
fn small(name: &str) -> (Preset, InverseProblemSpec) {
    let mut p = Preset::by_name(name).unwrap();
    p.nx = 40;
    p.nt = if p.t_final > 5.0 { 400 } else { 200 };
    let spec = p.build().unwrap();
    (p, spec)
}

fn check_contract(spec: &InverseProblemSpec) {
    let r = minimize(spec).unwrap();
    assert!(
        r.cost_history.windows(2).all(|w| w[1] <= w[0]),
        "cost increased: {:?}",
        r.cost_history
    );
    for p in &r.param_history {
        for (v, b) in p.iter().zip(&spec.bounds) {
            assert!(b.contains(*v), "{v} outside [{}, {}]", b.lo, b.hi);
        }
    }
}

#[test]
fn noiseless_presets_keep_the_optimizer_contract() {
    for name in ["test1", "test3", "test8", "test13"] {
        check_contract(&small(name).1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noisy_runs_keep_the_optimizer_contract(
        level in 0.0..0.05_f64,
        seed in any::<u64>(),
        a0 in 0.15..2.9_f64,
    ) {
        let (_, spec) = small("test1");
        let mut spec = spec.with_observation(add_noise(&spec.observation, NoiseSpec::new(level, seed).unwrap()));
        spec.initial = vec![a0];
        check_contract(&spec);
    }
}

#[test]
fn inversion_is_deterministic() {
    let (_, spec) = small("test2");
    let spec = spec.with_observation(add_noise(&spec.observation, NoiseSpec::new(1e-3, 7).unwrap()));
    let (a, b) = (minimize(&spec).unwrap(), minimize(&spec).unwrap());
    assert_eq!(a.param_history, b.param_history);
    assert_eq!(a.cost_history, b.cost_history);
}

#[test]
fn gradient_vanishes_at_the_optimum() {
    for name in ["test1", "test8"] {
        let (_, spec) = small(name);
        let r = minimize(&spec).unwrap();
        let g = gradient(&r.params, &spec).unwrap();
        let projected = r
            .params
            .iter()
            .zip(&g)
            .zip(&spec.bounds)
            .map(|((x, gi), b)| (x - b.clamp(x - gi)).abs())
            .fold(0.0_f64, f64::max);
        assert!(projected <= 1e-6 * (1.0 + r.cost), "{name}: {projected:e}");
    }
}

#[test]
fn gradient_is_reproducible_across_threads() {
    let (_, spec) = small("test14");
    let p = [3.8, 2.7, 0.9];
    let serial = gradient(&p, &spec).unwrap();
    let threads: Vec<Vec<f64>> = std::thread::scope(|s| {
        let hs: Vec<_> = (0..3).map(|_| s.spawn(|| gradient(&p, &spec).unwrap())).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(threads.iter().all(|g| *g == serial));
}

#[test]
fn noiseless_recovery_on_the_default_grids() {
    for name in ["test1", "test3", "test8", "test9"] {
        let p = Preset::by_name(name).unwrap();
        let r = minimize(&p.build().unwrap()).unwrap();
        assert!((r.params[0] - p.truth[0]).abs() <= 1e-3, "{name}: {:?}", r.params);
    }
}

#[test]
fn bounds_reject_empty_boxes() {
    assert!(Bounds::new(1.0, 1.0).is_err());
    assert!(Bounds::new(2.0, 1.0).is_err());
}
