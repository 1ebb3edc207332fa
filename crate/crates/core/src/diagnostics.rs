//! Numerical checks of the inequalities behind uniqueness and stability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq, trapezoid, weighted_h1_seminorm_sq, Field, Grid};
use crate::inversion::{minimize, InverseProblemSpec};
use crate::observations::{interior_level, time_derivative, Observation};
use crate::parabolic::{solve_parabolic_with, DegeneracyKind, DiffusionModel, SolverOptions, Source};

/// Closed-form constant `C_p` with `∫|u|² ≤ C_p ∫x^α|∂x u|²` on `(0, ℓ)`.
pub fn poincare_constant(alpha: f64, ell: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha must lie in [0, 2), got {alpha}")));
    }
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::OutOfRange(format!("ell must be positive, got {ell}")));
    }
    if alpha == 1.0 {
        if ell > 1.0 {
            return Err(Error::OutOfRange(format!(
                "the alpha = 1 constant ell(1 - log ell) needs ell <= 1, got {ell}"
            )));
        }
        Ok(ell * (1.0 - ell.ln()))
    } else {
        Ok(ell.powf(2.0 - alpha) / (2.0 - alpha))
    }
}

/// Piecewise-linear function with `2..=32` equal pieces and knot values
/// uniform in `[−1, 1]`, zero at `ℓ` and, unless `α ≥ 1`, also at `0`.
pub fn random_admissible(alpha: f64, grid: &Grid, rng: &mut impl Rng) -> Field {
    let pieces = rng.gen_range(2..=32_usize);
    let mut knots: Vec<f64> = (0..=pieces).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    knots[pieces] = 0.0;
    if DegeneracyKind::for_alpha(alpha).pins_origin() {
        knots[0] = 0.0;
    }
    let h = grid.ell() / pieces as f64;
    grid.sample(|x| {
        let s = (x / h).min(pieces as f64);
        let k = (s.floor() as usize).min(pieces - 1);
        let w = s - k as f64;
        (1.0 - w) * knots[k] + w * knots[k + 1]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub alpha: f64,
    pub ell: f64,
    pub constant: f64,
    pub max_ratio: f64,
    pub samples_used: usize,
    pub pass: bool,
}

/// Largest Rayleigh quotient `∫|u|² / ∫x^α|∂x u|²` over non-zero samples;
/// passes when it stays within 1% of `C_p`.
pub fn verify_poincare(samples: &[Field], alpha: f64, ell: f64) -> Result<PoincareReport> {
    let constant = poincare_constant(alpha, ell)?;
    let pins_origin = DegeneracyKind::for_alpha(alpha).pins_origin();
    let mut max_ratio = 0.0_f64;
    let mut used = 0;
    for u in samples {
        if (u.grid().ell() - ell).abs() > 1e-12 {
            return Err(Error::Incompatible(format!("sample lives on (0, {})", u.grid().ell())));
        }
        let v = u.values();
        let tol = 1e-12 * u.sup_norm();
        if v[v.len() - 1].abs() > tol || (pins_origin && v[0].abs() > tol) {
            return Err(Error::Incompatible("sample violates the boundary constraints".into()));
        }
        if u.is_zero() {
            continue;
        }
        let denom = weighted_h1_seminorm_sq(u, alpha)?;
        max_ratio = max_ratio.max(l2_norm_sq(u)? / denom);
        used += 1;
    }
    Ok(PoincareReport {
        alpha,
        ell,
        constant,
        max_ratio,
        samples_used: used,
        pass: max_ratio <= constant * (1.0 + 1e-2),
    })
}

/// Shared data of the two stability theorems.
#[derive(Debug, Clone)]
pub struct StabilitySetup {
    pub grid: Grid,
    pub u0: fn(f64) -> f64,
    pub source: Source,
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StabilityFamily {
    /// Coefficient `a x`, strong degeneracy, `a ∈ [a_low, a_high]`.
    Linear { a_low: f64, a_high: f64 },
    /// Coefficient `x^α`, each power with its own boundary regime; needs `ℓ < 1`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub p1: f64,
    pub p2: f64,
    /// `min_i ∫x^{α_i}|∂x u_i(·, t0)|²`.
    pub mu_hat: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Hypothesis (LB) is declared violated below this energy.
pub const MU_FLOOR: f64 = 1e-10;

/// Checks `|p2 − p1| ≤ C (‖∂t(u1 − u2)‖² + ∫x^w |∂x(u1 − u2)|²)^{1/2}` at `t0`
/// with `C` taken from the proof of the respective theorem, with 5% slack.
///
/// Linear family: `w = 1` and `C = (√C_p + a_high)/√μ̂`.
/// Power family: `w = max(α1, α2)` and
/// `C = (√C_p(α_min) + ℓ^{|α2−α1|/2}) / (ℓ(1 − ℓ)√μ̂)`.
pub fn lipschitz_stability_check(
    p1: f64,
    p2: f64,
    family: StabilityFamily,
    setup: &StabilitySetup,
) -> Result<StabilityReport> {
    let ell = setup.grid.ell();
    let (model1, model2, kind1, kind2) = match family {
        StabilityFamily::Linear { a_low, a_high } => {
            for a in [p1, p2] {
                if !(a_low..=a_high).contains(&a) || a_low <= 0.0 {
                    return Err(Error::OutOfRange(format!("a = {a} outside [{a_low}, {a_high}]")));
                }
            }
            (
                DiffusionModel::constant(p1, 1.0),
                DiffusionModel::constant(p2, 1.0),
                DegeneracyKind::Strong,
                DegeneracyKind::Strong,
            )
        }
        StabilityFamily::Power => {
            if !(ell < 1.0) {
                return Err(Error::OutOfRange(format!(
                    "the power estimate needs ell < 1, got {ell}"
                )));
            }
            (
                DiffusionModel::power(p1),
                DiffusionModel::power(p2),
                DegeneracyKind::for_alpha(p1),
                DegeneracyKind::for_alpha(p2),
            )
        }
    };
    let n0 = interior_level(&setup.grid, setup.t0)?;
    let u0 = setup.grid.sample(setup.u0);
    let opts = SolverOptions {
        last_level: Some(n0),
        ..Default::default()
    };
    let t1 = solve_parabolic_with(&model1, kind1, &setup.grid, &u0, &setup.source, &opts)?;
    let t2 = solve_parabolic_with(&model2, kind2, &setup.grid, &u0, &setup.source, &opts)?;
    let (u1, u2) = (t1.field(n0), t2.field(n0));
    let dgamma = time_derivative(&t1, n0)?.sub(&time_derivative(&t2, n0)?)?;
    let du = u1.sub(&u2)?;
    let e1 = weighted_h1_seminorm_sq(&u1, model1.alpha)?;
    let e2 = weighted_h1_seminorm_sq(&u2, model2.alpha)?;
    let mu_hat = e1.min(e2);
    if mu_hat < MU_FLOOR {
        return Err(Error::LowerBoundFails(mu_hat));
    }
    let w = model1.alpha.max(model2.alpha);
    let rhs = (l2_norm_sq(&dgamma)? + weighted_h1_seminorm_sq(&du, w)?).sqrt();
    let constant = match family {
        StabilityFamily::Linear { a_high, .. } => (poincare_constant(1.0, ell)?.sqrt() + a_high) / mu_hat.sqrt(),
        StabilityFamily::Power => {
            let lo = p1.min(p2);
            let gap = (p2 - p1).abs();
            (poincare_constant(lo, ell)?.sqrt() + ell.powf(gap / 2.0)) / (ell * (1.0 - ell) * mu_hat.sqrt())
        }
    };
    let lhs = (p2 - p1).abs();
    Ok(StabilityReport {
        p1,
        p2,
        mu_hat,
        lhs,
        rhs,
        constant,
        pass: lhs <= constant * rhs * (1.0 + 5e-2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    /// Parameters recovered from the unperturbed data.
    pub baseline: Vec<f64>,
    pub eps: Vec<f64>,
    pub recovered: Vec<Vec<f64>>,
    pub quotients: Vec<f64>,
}

impl QuotientReport {
    pub fn all_finite(&self) -> bool {
        self.quotients.iter().all(|q| q.is_finite())
    }

    pub fn median(&self) -> f64 {
        let mut q = self.quotients.clone();
        q.sort_by(f64::total_cmp);
        let n = q.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            q[n / 2]
        } else {
            0.5 * (q[n / 2 - 1] + q[n / 2])
        }
    }

    pub fn max(&self) -> f64 {
        self.quotients.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_over_median(&self) -> f64 {
        self.max() / self.median()
    }
}

/// `L²` norm of the difference between two observations, summed over channels.
fn observation_distance(a: &Observation, b: &Observation) -> f64 {
    let h = match a {
        Observation::InteriorAtT0 { gamma, .. } => gamma.grid().dx(),
        Observation::BoundaryFlux { grid, .. } => grid.dt(),
    };
    a.channels()
        .iter()
        .zip(b.channels())
        .map(|(x, y)| {
            let sq: Vec<f64> = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).collect();
            trapezoid(&sq, h).sqrt()
        })
        .sum()
}

/// `K_j = |p − p*_j| / Σ‖d − d*_j‖` where every channel of the clean data
/// `d` is shifted by `ε_j ~ U(0, eps_max)` and `p*_j` is recovered from the
/// shifted data; `p` is recovered from the clean data.
pub fn stability_quotients(
    spec: &InverseProblemSpec,
    n_trials: usize,
    eps_max: f64,
    seed: u64,
) -> Result<QuotientReport> {
    if !(eps_max > 0.0) {
        return Err(Error::OutOfRange(format!("eps_max must be positive, got {eps_max}")));
    }
    let baseline = minimize(spec)?.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..n_trials)
        .map(|_| loop {
            let e = rng.gen_range(0.0..eps_max);
            if e > 0.0 {
                break e;
            }
        })
        .collect();
    let recovered: Vec<Vec<f64>> = eps
        .par_iter()
        .map(|&e| minimize(&spec.with_observation(spec.observation.shifted(e))).map(|r| r.params))
        .collect::<Result<_>>()?;
    let quotients = eps
        .iter()
        .zip(&recovered)
        .map(|(&e, p)| {
            let dp = p
                .iter()
                .zip(&baseline)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            dp / observation_distance(&spec.observation, &spec.observation.shifted(e))
        })
        .collect();
    Ok(QuotientReport {
        baseline,
        eps,
        recovered,
        quotients,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub s: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Ratio at twice the largest requested `s`.
    pub ratio_at_double: f64,
    pub pass: bool,
}

/// `r(s) = s ∫|f|² e^{2sφ0} / ∫|f'|² e^{2sφ0}` over `(θ + δ, ℓ)` with
/// `φ0(x) = e^{λ(x−θ)²}`.
///
/// `f` is sampled on its grid, `f'` by differences on each cell. The weight
/// is rescaled by its maximum so large `s` does not overflow. The check
/// passes when every ratio is finite and `r(2 s_max) ≤ 1.2 r(s_max)`.
pub fn carleman_1d_ratio(f: &Field, theta: f64, delta: f64, lambda: f64, s_list: &[f64]) -> Result<CarlemanReport> {
    let g = *f.grid();
    let v = f.values();
    let right = v[v.len() - 1];
    if right.abs() > 1e-12 * f.sup_norm().max(1.0) {
        return Err(Error::Incompatible("f must vanish at the right end".into()));
    }
    let left = theta + delta;
    if !(left >= 0.0 && left < g.ell()) {
        return Err(Error::OutOfRange(format!("window ({left}, {}) is empty", g.ell())));
    }
    if s_list.is_empty() || s_list.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::OutOfRange("s values must be positive".into()));
    }
    let dx = g.dx();
    let first = (left / dx).ceil() as usize;
    if first + 2 >= g.n_nodes() {
        return Err(Error::InsufficientData("window holds fewer than three nodes".into()));
    }
    if v[first..].iter().all(|&x| x == 0.0) {
        return Err(Error::InsufficientData("f vanishes on the window".into()));
    }
    let phi = |x: f64| (lambda * (x - theta).powi(2)).exp();

    let ratio = |s: f64| -> f64 {
        let shift = 2.0 * s * phi(left).max(phi(g.ell()));
        let weight = |x: f64| (2.0 * s * phi(x) - shift).exp();
        let num: Vec<f64> = (first..g.n_nodes()).map(|i| v[i] * v[i] * weight(g.x(i))).collect();
        let den: f64 = (first..g.n_nodes() - 1)
            .map(|i| ((v[i + 1] - v[i]) / dx).powi(2) * weight(g.x_half(i)) * dx)
            .sum();
        s * trapezoid(&num, dx) / den
    };
    let ratios: Vec<f64> = s_list.iter().map(|&s| ratio(s)).collect();
    let s_max = s_list.iter().cloned().fold(0.0_f64, f64::max);
    let r_max = ratio(s_max);
    let ratio_at_double = ratio(2.0 * s_max);
    let pass = ratios.iter().all(|r| r.is_finite()) && ratio_at_double.is_finite() && ratio_at_double <= 1.2 * r_max;
    Ok(CarlemanReport {
        s: s_list.to_vec(),
        ratios,
        ratio_at_double,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn poincare_constants() {
        assert_eq!(poincare_constant(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(poincare_constant(0.0, 1.0).unwrap(), 0.5);
        assert_eq!(poincare_constant(1.5, 1.0).unwrap(), 2.0);
        assert!(poincare_constant(1.0, 1.2).is_err());
        assert!(poincare_constant(2.0, 1.0).is_err());
        assert!(poincare_constant(0.5, 0.0).is_err());
    }

    #[test]
    fn sine_rayleigh_quotient() {
        let g = Grid::new(1.0, 2000, 1.0, 10).unwrap();
        let r = verify_poincare(&[g.sample(|x| (PI * x).sin()), Field::zeros(g)], 0.0, 1.0).unwrap();
        assert!((r.max_ratio - 1.0 / (PI * PI)).abs() < 1e-5);
        assert_eq!(r.samples_used, 1);
        assert!(r.pass);
    }

    #[test]
    fn inadmissible_sample_is_rejected() {
        let g = Grid::new(1.0, 100, 1.0, 10).unwrap();
        assert!(verify_poincare(&[g.sample(|x| 1.0 - x)], 0.5, 1.0).is_err());
        assert!(verify_poincare(&[g.sample(|x| 1.0 - x)], 1.5, 1.0).is_ok());
    }

    #[test]
    fn random_samples_respect_the_boundary_rule() {
        let g = Grid::new(1.0, 500, 1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [0.0, 0.5, 1.3] {
            let samples: Vec<Field> = (0..100).map(|_| random_admissible(alpha, &g, &mut rng)).collect();
            let r = verify_poincare(&samples, alpha, 1.0).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    fn linear_setup() -> StabilitySetup {
        StabilitySetup {
            grid: Grid::new(1.0, 100, 0.2, 200).unwrap(),
            u0: |x| 0.5 * x * x * (1.0 - x),
            source: Source::Zero,
            t0: 0.2,
        }
    }

    #[test]
    fn linear_stability() {
        let fam = StabilityFamily::Linear {
            a_low: 0.2,
            a_high: 1.7,
        };
        let same = lipschitz_stability_check(1.0, 1.0, fam, &linear_setup()).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.pass);
        for (a1, a2) in [(1.0, 1.2), (0.2, 1.7)] {
            let r = lipschitz_stability_check(a1, a2, fam, &linear_setup()).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert!(lipschitz_stability_check(0.1, 1.0, fam, &linear_setup()).is_err());
    }

    #[test]
    fn power_stability_needs_ell_below_one() {
        let s = linear_setup();
        assert!(lipschitz_stability_check(0.5, 0.8, StabilityFamily::Power, &s).is_err());
    }

    #[test]
    fn zero_data_fails_the_lower_bound() {
        let mut s = linear_setup();
        s.u0 = |_| 0.0;
        let fam = StabilityFamily::Linear {
            a_low: 0.2,
            a_high: 1.7,
        };
        assert!(matches!(
            lipschitz_stability_check(1.0, 1.2, fam, &s),
            Err(Error::LowerBoundFails(_))
        ));
    }

    #[test]
    fn carleman_examples() {
        let g = Grid::new(1.0, 100_000, 1.0, 10).unwrap();
        let s = [10.0, 20.0, 40.0, 80.0];
        for f in [g.sample(|x| 1.0 - x), g.sample(|x| (1.0 - x).powi(2))] {
            let r = carleman_1d_ratio(&f, 0.25, 0.25, 4.0, &s).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert!(carleman_1d_ratio(&Field::zeros(g), 0.25, 0.25, 4.0, &s).is_err());
        assert!(carleman_1d_ratio(&g.sample(|x| x), 0.25, 0.25, 4.0, &s).is_err());
    }
}
