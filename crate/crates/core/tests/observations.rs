use std::f64::consts::PI;

use degen_core::grid::{l2_norm_sq, Field, Grid};
use degen_core::observations::{add_noise, measure_interior, synthesize, ForwardSetup, NoiseSpec};
use degen_core::parabolic::{solve_parabolic, DegeneracyKind, DiffusionModel, Source};
use degen_core::{Observation, ObservationKind, WeightKind};
use proptest::prelude::*;

fn eigen_error(nx: usize, nt: usize) -> f64 {
    let g = Grid::new(1.0, nx, 0.2, nt).unwrap();
    let traj = solve_parabolic(
        &DiffusionModel::constant(1.0, 0.0),
        DegeneracyKind::NonDegenerate,
        &g,
        &g.sample(|x| (PI * x).sin()),
        &Source::Zero,
    )
    .unwrap();
    let (gamma, beta) = measure_interior(&traj, 0.1, WeightKind::Linear).unwrap();
    let t = g.t(g.nearest_level(0.1));
    let decay = (-PI * PI * t).exp();
    let g_exact = g.sample(|x| -PI * PI * decay * (PI * x).sin());
    let b_exact = g.sample(|x| x * PI * decay * (PI * x).cos());
    let err = |a: &Field, b: &Field| (l2_norm_sq(&a.sub(b).unwrap()).unwrap() / l2_norm_sq(b).unwrap()).sqrt();
    err(&gamma, &g_exact) + err(&beta, &b_exact)
}

#[test]
fn eigenmode_measurement_converges() {
    let (coarse, fine) = (eigen_error(39, 40), eigen_error(79, 160));
    assert!(coarse / fine >= 3.0, "{coarse:e} {fine:e}");
}

fn target() -> Observation {
    let g = Grid::new(1.0, 30, 1.0, 60).unwrap();
    let setup = ForwardSetup {
        kind: DegeneracyKind::Strong,
        u0: |x| 0.5 * x * x * (1.0 - x),
        source: Source::Zero,
    };
    synthesize(
        &DiffusionModel::constant(1.7, 1.0),
        &setup,
        &g,
        ObservationKind::BoundaryFlux,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noise_is_seeded_and_bounded(level in 1e-6..0.1_f64, seed in any::<u64>()) {
        let clean = target();
        let a = add_noise(&clean, NoiseSpec::new(level, seed).unwrap());
        let b = add_noise(&clean, NoiseSpec::new(level, seed).unwrap());
        prop_assert_eq!(&a, &b);
        let c = add_noise(&clean, NoiseSpec::new(level, seed.wrapping_add(1)).unwrap());
        let diff = a.channels()[0].iter().zip(c.channels()[0]).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(diff > 0.0);
        let d = clean.channels()[0];
        let sup = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (n, v) in a.channels()[0].iter().zip(d) {
            prop_assert!((n - v).abs() <= level * sup);
        }
    }
}
