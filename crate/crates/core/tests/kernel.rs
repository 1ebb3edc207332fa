use std::f64::consts::PI;

use degen_core::grid::Grid;
use degen_core::parabolic::DiffusionModel;
use degen_core::wave::{reznitskaya_apply, verify_equivalence, EquivalenceOptions, KernelQuadrature};
use proptest::prelude::*;

fn eta(coeffs: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k as f64 + 1.0) * 0.7 * t).sin() + c * c * (-(k as f64) * t).exp())
            .sum()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_linear(
        c1 in prop::collection::vec(-2.0..2.0_f64, 3),
        c2 in prop::collection::vec(-2.0..2.0_f64, 3),
        a in -3.0..3.0_f64,
        b in -3.0..3.0_f64,
        t in 0.01..2.0_f64,
    ) {
        let (e1, e2) = (eta(&c1), eta(&c2));
        let combined = |s: f64| a * e1(s) + b * e2(s);
        let lhs = reznitskaya_apply(&combined, t).unwrap();
        let rhs = a * reznitskaya_apply(&e1, t).unwrap() + b * reznitskaya_apply(&e2, t).unwrap();
        let scale = (a.abs() * reznitskaya_apply(&|s: f64| e1(s).abs(), t).unwrap()
            + b.abs() * reznitskaya_apply(&|s: f64| e2(s).abs(), t).unwrap()).max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn kernel_averages(c in prop::collection::vec(-2.0..2.0_f64, 3), t in 0.01..2.0_f64) {
        let e = eta(&c);
        let q = KernelQuadrature::new(t, 4000).unwrap();
        let samples: Vec<f64> = q.nodes().map(|(tau, _)| e(tau)).collect();
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = q.apply(&e).unwrap();
        let slack = 1e-9 * (lo.abs() + hi.abs());
        prop_assert!(k >= lo - slack && k <= hi + slack, "{lo} <= {k} <= {hi}");
    }
}

#[test]
fn kernel_of_positive_signal_is_positive() {
    for t in [0.01, 0.1, 1.0] {
        assert!(reznitskaya_apply(&|s: f64| (-s).exp() * 1e-3, t).unwrap() > 0.0);
    }
}

#[test]
fn equivalence_error_shrinks_under_refinement() {
    let model = DiffusionModel::constant(1.0, 0.0);
    let errs: Vec<f64> = [(40usize, 400usize, 1000usize), (80, 1600, 2000)]
        .iter()
        .map(|&(nx, nt, n_tau)| {
            let g = Grid::new(1.0, nx, 1.0, nt).unwrap();
            let opts = EquivalenceOptions {
                n_tau,
                ..Default::default()
            };
            verify_equivalence(&model, &g, |x| (PI * x).sin(), &[0.1], &opts).unwrap()[0]
        })
        .collect();
    assert!(errs[0] >= 2.0 * errs[1], "{errs:?}");
}
