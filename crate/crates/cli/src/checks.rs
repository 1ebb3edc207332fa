//! Diagnostic experiments behind the `stability`, `poincare`, `carleman`
//! and `reznitskaya-check` subcommands.

use std::f64::consts::PI;

use anyhow::Result;
use degen_core::diagnostics::{
    carleman_1d_ratio, lipschitz_stability_check, random_admissible, stability_quotients, verify_poincare,
    CarlemanReport, PoincareReport, QuotientReport, StabilityFamily, StabilityReport, StabilitySetup,
};
use degen_core::grid::Grid;
use degen_core::parabolic::{DiffusionModel, Source};
use degen_core::presets::Preset;
use degen_core::wave::{verify_equivalence, verify_lemma2, EquivalenceOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{num, Table};

/// One named pass/fail outcome with a human-readable measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&["check", "pass", "detail"]);
    for c in checks {
        t.push(vec![c.name.clone(), c.pass.to_string(), c.detail.clone()]);
    }
    t
}

pub const POINCARE_ALPHAS: [f64; 5] = [0.0, 0.5, 1.0, 1.3, 1.9];

/// `samples` random admissible functions per `α` on `(0, 1)`.
pub fn poincare_sweep(alphas: &[f64], samples: usize, seed: u64) -> Result<Vec<PoincareReport>> {
    let grid = Grid::new(1.0, 400, 1.0, 8)?;
    alphas
        .par_iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let fields: Vec<_> = (0..samples)
                .map(|_| random_admissible(alpha, &grid, &mut rng))
                .collect();
            Ok(verify_poincare(&fields, alpha, 1.0)?)
        })
        .collect()
}

pub fn poincare_table(reports: &[PoincareReport]) -> Table {
    let mut t = Table::new(&["alpha", "ell", "c_p", "max_ratio", "samples", "pass"]);
    for r in reports {
        t.push(vec![
            num(r.alpha),
            num(r.ell),
            num(r.constant),
            num(r.max_ratio),
            r.samples_used.to_string(),
            r.pass.to_string(),
        ]);
    }
    t
}

/// Grid of the Lipschitz checks for the constant-`a` family.
pub const LINEAR_GRID: [f64; 5] = [0.2, 0.575, 0.95, 1.325, 1.7];
/// Grid of the power checks, spanning both degeneracy regimes.
pub const POWER_GRID: [f64; 5] = [0.2, 0.5, 0.8, 1.3, 1.6];
pub const POWER_ELL: f64 = 0.9;

fn quartic(x: f64) -> f64 {
    0.3 * x * x * (1.0 - x) * (1.0 - x)
}

fn cubic(x: f64) -> f64 {
    0.5 * x * x * (1.0 - x)
}

pub fn linear_setup() -> Result<StabilitySetup> {
    Ok(StabilitySetup {
        grid: Grid::new(1.0, 200, 0.2, 400)?,
        u0: cubic,
        source: Source::Zero,
        t0: 0.2,
    })
}

pub fn power_setup() -> Result<StabilitySetup> {
    Ok(StabilitySetup {
        grid: Grid::new(POWER_ELL, 200, 0.2, 400)?,
        u0: quartic,
        source: Source::Zero,
        t0: 0.2,
    })
}

/// Both 5×5 grids: constant `a` (strong, `α = 1`) and pure powers at `ℓ = 0.9`.
pub fn lipschitz_grids() -> Result<(Vec<StabilityReport>, Vec<StabilityReport>)> {
    let pairs = |g: &[f64]| -> Vec<(f64, f64)> { g.iter().flat_map(|&a| g.iter().map(move |&b| (a, b))).collect() };
    let lin = linear_setup()?;
    let fam = StabilityFamily::Linear {
        a_low: LINEAR_GRID[0],
        a_high: LINEAR_GRID[4],
    };
    let linear = pairs(&LINEAR_GRID)
        .par_iter()
        .map(|&(a, b)| Ok(lipschitz_stability_check(a, b, fam, &lin)?))
        .collect::<Result<Vec<_>>>()?;
    let pow = power_setup()?;
    let power = pairs(&POWER_GRID)
        .par_iter()
        .map(|&(a, b)| Ok(lipschitz_stability_check(a, b, StabilityFamily::Power, &pow)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((linear, power))
}

pub fn stability_table(family: &str, reports: &[StabilityReport]) -> Table {
    let mut t = Table::new(&["family", "p1", "p2", "mu_hat", "lhs", "rhs", "constant", "pass"]);
    for r in reports {
        t.push(vec![
            family.to_string(),
            num(r.p1),
            num(r.p2),
            num(r.mu_hat),
            num(r.lhs),
            num(r.rhs),
            num(r.constant),
            r.pass.to_string(),
        ]);
    }
    t
}

pub const QUOTIENT_TRIALS: usize = 50;
pub const QUOTIENT_EPS: f64 = 0.05;

pub fn quotients(preset: &Preset, n_trials: usize, eps_max: f64, seed: u64) -> Result<QuotientReport> {
    Ok(stability_quotients(&preset.build()?, n_trials, eps_max, seed)?)
}

pub fn quotient_table(r: &QuotientReport) -> Table {
    let mut t = Table::new(&["trial", "eps", "recovered", "k"]);
    for (j, ((e, p), k)) in r.eps.iter().zip(&r.recovered).zip(&r.quotients).enumerate() {
        let p: Vec<String> = p.iter().map(|&v| num(v)).collect();
        t.push(vec![j.to_string(), num(*e), p.join(" "), num(*k)]);
    }
    t
}

pub const CARLEMAN_S: [f64; 5] = [10.0, 20.0, 40.0, 80.0, 160.0];
pub const CARLEMAN_THETA: f64 = 0.25;
pub const CARLEMAN_DELTA: f64 = 0.25;
pub const CARLEMAN_LAMBDA: f64 = 4.0;

/// Ratios for `f = 1 − x` and `f = (1 − x)²`.
pub fn carleman_reports() -> Result<Vec<(String, CarlemanReport)>> {
    let g = Grid::new(1.0, 200_000, 1.0, 8)?;
    type Case = (&'static str, fn(f64) -> f64);
    let cases: [Case; 2] = [("1-x", |x| 1.0 - x), ("(1-x)^2", |x| (1.0 - x) * (1.0 - x))];
    cases
        .iter()
        .map(|(name, f)| {
            let r = carleman_1d_ratio(
                &g.sample(f),
                CARLEMAN_THETA,
                CARLEMAN_DELTA,
                CARLEMAN_LAMBDA,
                &CARLEMAN_S,
            )?;
            Ok((name.to_string(), r))
        })
        .collect()
}

pub fn carleman_table(reports: &[(String, CarlemanReport)]) -> Table {
    let mut t = Table::new(&["f", "s", "ratio"]);
    for (name, r) in reports {
        for (s, q) in r.s.iter().zip(&r.ratios) {
            t.push(vec![name.clone(), num(*s), num(*q)]);
        }
        t.push(vec![
            name.clone(),
            num(2.0 * r.s.iter().cloned().fold(0.0, f64::max)),
            num(r.ratio_at_double),
        ]);
    }
    t
}

/// Evaluation times of the kernel identity checks.
pub fn lemma2_times() -> Vec<f64> {
    (1..=10).map(|k| 0.05 * k as f64).collect()
}

/// Defects `|d/dt Kη − K η''|` for `η = τ²`, `η ≡ 1`, `η = cos πτ`.
pub fn lemma2_defects() -> Result<Vec<(String, f64)>> {
    let ts = lemma2_times();
    Ok(vec![
        ("tau^2".into(), verify_lemma2(&|t| t * t, &|_| 2.0, &ts)?),
        ("1".into(), verify_lemma2(&|_| 1.0, &|_| 0.0, &ts)?),
        (
            "cos(pi tau)".into(),
            verify_lemma2(&|t| (PI * t).cos(), &|t| -PI * PI * (PI * t).cos(), &ts)?,
        ),
    ])
}

pub const EQUIVALENCE_TIMES: [f64; 3] = [0.05, 0.1, 0.2];

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRun {
    pub case: String,
    pub t: f64,
    pub rel_error: f64,
    pub tolerance: f64,
}

/// Wave-plus-kernel versus parabolic solutions: the `α = 0` eigenmode and
/// `α = 0.5` with `u0 = x(1 − x)` against a refined parabolic reference.
pub fn equivalence_runs() -> Result<Vec<EquivalenceRun>> {
    let g = Grid::new(1.0, 100, 1.0, 1000)?;
    let eig = verify_equivalence(
        &DiffusionModel::constant(1.0, 0.0),
        &g,
        |x| (PI * x).sin(),
        &EQUIVALENCE_TIMES,
        &EquivalenceOptions::default(),
    )?;
    let mut out: Vec<EquivalenceRun> = EQUIVALENCE_TIMES
        .iter()
        .zip(eig)
        .map(|(&t, e)| EquivalenceRun {
            case: "alpha=0, u0=sin(pi x)".into(),
            t,
            rel_error: e,
            tolerance: 1e-2,
        })
        .collect();
    let g = Grid::new(1.0, 200, 1.0, 2000)?;
    let opts = EquivalenceOptions {
        reference_refinement: 4,
        ..Default::default()
    };
    let weak = verify_equivalence(&DiffusionModel::power(0.5), &g, |x| x * (1.0 - x), &[0.05], &opts)?;
    out.push(EquivalenceRun {
        case: "alpha=0.5, u0=x(1-x)".into(),
        t: 0.05,
        rel_error: weak[0],
        tolerance: 3e-2,
    });
    Ok(out)
}

pub fn equivalence_table(runs: &[EquivalenceRun], defects: &[(String, f64)]) -> Table {
    let mut t = Table::new(&["check", "t", "value", "tolerance"]);
    for r in runs {
        t.push(vec![
            format!("equivalence {}", r.case),
            num(r.t),
            num(r.rel_error),
            num(r.tolerance),
        ]);
    }
    for (name, d) in defects {
        t.push(vec![format!("lemma2 eta={name}"), String::new(), num(*d), num(1e-4)]);
    }
    t
}
