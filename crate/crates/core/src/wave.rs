//! Hyperbolic companion problem and the heat-kernel transform
//! `(Kη)(t) = ∫₀^∞ η(τ) G(t, τ) dτ`, `G(t, τ) = e^{−τ²/4t} / √(πt)`.
//!
//! For weak degeneracy the solution `ũ` of `ũ_ττ = ∂x(κ ∂x ũ)`, `ũ(·,0) = u0`,
//! `ũ_τ(·,0) = 0` is mapped by `K` onto the solution of the heat problem
//! with the same initial value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq, Field, Grid};
use crate::parabolic::{
    cell_conductances, solve_parabolic_with, DegeneracyKind, DiffusionModel, SolverOptions, Source, Trajectory,
};

/// `tau_max = TAIL_FACTOR · √t`; the Gaussian tail beyond it is below 1e−10.
pub const TAIL_FACTOR: f64 = 13.0;

pub const DEFAULT_PANELS: usize = 4000;

/// Courant number used by the leapfrog solver.
pub const COURANT: f64 = 0.9;

/// A function of `τ ≥ 0` known up to `horizon()`.
pub trait Signal {
    fn eval(&self, tau: f64) -> f64;

    fn horizon(&self) -> f64 {
        f64::INFINITY
    }
}

impl<F: Fn(f64) -> f64 + ?Sized> Signal for F {
    fn eval(&self, tau: f64) -> f64 {
        self(tau)
    }
}

/// Uniformly sampled series on `[0, dt·(len−1)]`, interpolated by
/// Catmull–Rom cubics and reflected evenly at `τ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.len() < 4 {
            return Err(Error::InsufficientData(
                "time series needs dt > 0 and at least 4 samples".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(Self { dt, values })
    }

    fn at(&self, k: isize) -> f64 {
        let last = self.values.len() as isize - 1;
        let k = k.unsigned_abs() as isize;
        // Even reflection at both ends keeps the stencil inside the data.
        let k = if k > last { 2 * last - k } else { k };
        self.values[k as usize]
    }
}

impl Signal for TimeSeries {
    fn eval(&self, tau: f64) -> f64 {
        let s = tau / self.dt;
        let k = (s.floor() as isize).min(self.values.len() as isize - 2);
        let u = s - k as f64;
        let (p0, p1, p2, p3) = (self.at(k - 1), self.at(k), self.at(k + 1), self.at(k + 2));
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = 0.5 * (p2 - p0);
        ((a * u + b) * u + c) * u + p1
    }

    fn horizon(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }
}

/// Trapezoid rule for `K` at one time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelQuadrature {
    pub t: f64,
    pub tau_max: f64,
    pub n_tau: usize,
}

impl KernelQuadrature {
    pub fn new(t: f64, n_tau: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::OutOfRange(format!("kernel time must be positive, got {t}")));
        }
        if n_tau < 2 {
            return Err(Error::OutOfRange("need at least two panels".into()));
        }
        Ok(Self {
            t,
            tau_max: TAIL_FACTOR * t.sqrt(),
            n_tau,
        })
    }

    pub fn kernel(&self, tau: f64) -> f64 {
        (-tau * tau / (4.0 * self.t)).exp() / (PI * self.t).sqrt()
    }

    /// Nodes and trapezoid weights, kernel included.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = self.tau_max / self.n_tau as f64;
        (0..=self.n_tau).map(move |j| {
            let tau = j as f64 * h;
            let w = if j == 0 || j == self.n_tau { 0.5 * h } else { h };
            (tau, w * self.kernel(tau))
        })
    }

    pub fn apply(&self, eta: &(impl Signal + ?Sized)) -> Result<f64> {
        let available = eta.horizon();
        if self.tau_max > available * (1.0 + 1e-12) {
            return Err(Error::HorizonTooShort {
                needed: self.tau_max,
                available,
            });
        }
        Ok(self.nodes().map(|(tau, w)| w * eta.eval(tau)).sum())
    }
}

/// `(Kη)(t)` with the default number of panels.
pub fn reznitskaya_apply(eta: &(impl Signal + ?Sized), t: f64) -> Result<f64> {
    KernelQuadrature::new(t, DEFAULT_PANELS)?.apply(eta)
}

/// `max_t |d/dt (Kη)(t) − (Kη'')(t)|`, the time derivative taken by centred
/// differences with step `1e−3 t`.
pub fn verify_lemma2(eta: &dyn Fn(f64) -> f64, eta_dd: &dyn Fn(f64) -> f64, t_grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t in t_grid {
        let h = 1e-3 * t;
        let d = (reznitskaya_apply(eta, t + h)? - reznitskaya_apply(eta, t - h)?) / (2.0 * h);
        worst = worst.max((d - reznitskaya_apply(eta_dd, t)?).abs());
    }
    Ok(worst)
}

/// Leapfrog for `ũ_ττ = ∂x(κ ∂x ũ)` on `[0, t_max]`, Dirichlet at both ends,
/// starting from rest.
///
/// The step is `min(grid.dt(), 0.9 dx / √max κ)`; every step is stored, so
/// the returned trajectory lives on its own time grid.
pub fn solve_wave(model: &DiffusionModel, grid: &Grid, u0: &Field, t_max: f64) -> Result<Trajectory> {
    if model.alpha >= 1.0 {
        return Err(Error::OutOfRange(format!(
            "the wave companion needs alpha < 1, got {}",
            model.alpha
        )));
    }
    DegeneracyKind::for_alpha(model.alpha).check_alpha(model.alpha)?;
    if u0.grid().nx() != grid.nx() || u0.grid().ell() != grid.ell() {
        return Err(Error::Incompatible("initial field lives on a different grid".into()));
    }
    let v = u0.values();
    let scale = 1e-12 * u0.sup_norm().max(1.0);
    if v[0].abs() > scale || v[v.len() - 1].abs() > scale {
        return Err(Error::Incompatible("initial field must vanish at both ends".into()));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::OutOfRange(format!("t_max must be positive, got {t_max}")));
    }
    let kappa = cell_conductances(model, grid, DegeneracyKind::for_alpha(model.alpha))?;
    let kmax = kappa.iter().cloned().fold(0.0_f64, f64::max);
    if !(kmax > 0.0) {
        return Err(Error::NonPositiveCoefficient { x: 0.0, value: kmax });
    }
    let dx = grid.dx();
    let dt_cfl = COURANT * dx / kmax.sqrt();
    let steps = ((t_max / grid.dt().min(dt_cfl)).ceil() as usize).max(crate::grid::MIN_STEPS);
    let out = Grid::new(grid.ell(), grid.nx(), t_max, steps)?;
    let dt = out.dt();
    let m = grid.n_nodes();
    let c = dt * dt / (dx * dx);
    let apply = |u: &[f64], i: usize| kappa[i] * (u[i + 1] - u[i]) - kappa[i - 1] * (u[i] - u[i - 1]);

    let mut values = vec![0.0; (steps + 1) * m];
    values[..m].copy_from_slice(v);
    values[0] = 0.0;
    values[m - 1] = 0.0;
    for i in 1..m - 1 {
        values[m + i] = values[i] + 0.5 * c * apply(&values[..m], i);
    }
    for n in 1..steps {
        let (head, tail) = values.split_at_mut((n + 1) * m);
        let prev = &head[(n - 1) * m..n * m];
        let cur = &head[n * m..];
        let next = &mut tail[..m];
        for i in 1..m - 1 {
            next[i] = 2.0 * cur[i] - prev[i] + c * apply(cur, i);
        }
    }
    Trajectory::new(out, values)
}

/// Discrete energy `‖(u^{n+1} − u^{n−1})/2dt‖² + Σ κ_{i+1/2}(u_{i+1} − u_i)²/dx`
/// at levels `1..nt`.
pub fn wave_energy(traj: &Trajectory, model: &DiffusionModel) -> Result<Vec<f64>> {
    let g = *traj.grid();
    let kappa = cell_conductances(model, &g, DegeneracyKind::for_alpha(model.alpha))?;
    let (dx, dt) = (g.dx(), g.dt());
    Ok((1..g.nt())
        .map(|n| {
            let (p, u, q) = (traj.level(n - 1), traj.level(n), traj.level(n + 1));
            let vel: Vec<f64> = q.iter().zip(p).map(|(a, b)| ((a - b) / (2.0 * dt)).powi(2)).collect();
            let kinetic = crate::grid::trapezoid(&vel, dx);
            let potential: f64 = kappa
                .iter()
                .enumerate()
                .map(|(i, k)| k * (u[i + 1] - u[i]).powi(2) / dx)
                .sum();
            kinetic + potential
        })
        .collect())
}

/// How `verify_equivalence` builds both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOptions {
    pub n_tau: usize,
    /// Spatial refinement of the parabolic reference (1 means the same grid).
    pub reference_refinement: usize,
    /// Parabolic steps per unit time on the reference.
    pub reference_steps_per_unit: usize,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            n_tau: DEFAULT_PANELS,
            reference_refinement: 1,
            reference_steps_per_unit: 20_000,
        }
    }
}

/// Relative L² error between `K` applied node-wise to the wave trajectory
/// and the parabolic solution, for every `t` in `t_list`.
///
/// `grid` supplies the mesh (its `t_final` is ignored) and the nominal wave
/// step. With `reference_refinement = r > 1` the parabolic side is computed
/// on the `r`-times refined mesh and injected back.
pub fn verify_equivalence(
    model: &DiffusionModel,
    grid: &Grid,
    u0: fn(f64) -> f64,
    t_list: &[f64],
    opts: &EquivalenceOptions,
) -> Result<Vec<f64>> {
    let t_big = t_list.iter().cloned().fold(0.0_f64, f64::max);
    if !(t_big > 0.0) || t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::OutOfRange("equivalence times must be positive".into()));
    }
    let kind = DegeneracyKind::for_alpha(model.alpha);
    let wave = solve_wave(model, grid, &grid.sample(u0), TAIL_FACTOR * t_big.sqrt())?;
    let wdt = wave.grid().dt();
    let series: Vec<TimeSeries> = (0..grid.n_nodes())
        .map(|i| TimeSeries::new(wdt, wave.node_series(i)))
        .collect::<Result<_>>()?;

    t_list
        .iter()
        .map(|&t| {
            let quad = KernelQuadrature::new(t, opts.n_tau)?;
            let k_side: Vec<f64> = series.iter().map(|s| quad.apply(s)).collect::<Result<_>>()?;
            let k_side = Field::new(grid.with_time(t, crate::grid::MIN_STEPS)?, k_side)?;

            let r = opts.reference_refinement.max(1);
            let nt = ((t * opts.reference_steps_per_unit as f64).ceil() as usize).max(crate::grid::MIN_STEPS);
            let ref_grid = Grid::new(grid.ell(), r * (grid.nx() + 1) - 1, t, nt)?;
            let traj = solve_parabolic_with(
                model,
                kind,
                &ref_grid,
                &ref_grid.sample(u0),
                &Source::Zero,
                &SolverOptions::default(),
            )?;
            let reference = traj.last().resample(k_side.grid())?;
            let err = l2_norm_sq(&k_side.sub(&reference)?)?.sqrt();
            let norm = l2_norm_sq(&reference)?.sqrt();
            if norm == 0.0 {
                return Ok(err);
            }
            Ok(err / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_moments() {
        assert!((reznitskaya_apply(&|_: f64| 1.0, 0.3).unwrap() - 1.0).abs() < 1e-8);
        assert!((reznitskaya_apply(&|t: f64| t * t, 0.1).unwrap() - 0.2).abs() < 1e-6);
        let c = reznitskaya_apply(&|t: f64| (PI * t).cos(), 0.1).unwrap();
        assert!((c - (-PI * PI * 0.1_f64).exp()).abs() < 1e-8);
        assert!((c - 0.37271).abs() < 1e-5);
    }

    #[test]
    fn short_horizon_is_reported() {
        let s = TimeSeries::new(0.01, vec![1.0; 101]).unwrap();
        assert!(matches!(reznitskaya_apply(&s, 1.0), Err(Error::HorizonTooShort { .. })));
        assert!((reznitskaya_apply(&s, 0.005).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn series_interpolates_cubics_locally() {
        let s = TimeSeries::new(0.1, (0..50).map(|k| (0.1 * k as f64).powi(2)).collect()).unwrap();
        for tau in [0.0, 0.05, 0.73, 2.5, 4.75] {
            assert!((s.eval(tau) - tau * tau).abs() < 1e-12, "{tau}");
        }
    }

    #[test]
    fn lemma2_defects() {
        let ts: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
        assert!(verify_lemma2(&|t| t * t, &|_| 2.0, &ts).unwrap() <= 1e-5);
        assert!(verify_lemma2(&|_| 1.0, &|_| 0.0, &ts).unwrap() <= 1e-8);
        let d = verify_lemma2(&|t| (PI * t).cos(), &|t| -PI * PI * (PI * t).cos(), &ts).unwrap();
        assert!(d <= 1e-4, "{d}");
    }

    fn sine_wave(nx: usize) -> (Grid, Trajectory) {
        let g = Grid::new(1.0, nx, 1.0, 1000).unwrap();
        let m = DiffusionModel::constant(1.0, 0.0);
        let traj = solve_wave(&m, &g, &g.sample(|x| (PI * x).sin()), 1.0).unwrap();
        (g, traj)
    }

    #[test]
    fn wave_eigenmode() {
        let (g, traj) = sine_wave(200);
        let exact = g.sample(|x| (PI * 1.0).cos() * (PI * x).sin());
        let got = traj.last().resample(&g).unwrap();
        let rel = (l2_norm_sq(&got.sub(&exact).unwrap()).unwrap() / l2_norm_sq(&exact).unwrap()).sqrt();
        assert!(rel < 1e-2, "{rel}");
    }

    #[test]
    fn wave_energy_is_conserved() {
        let (_, traj) = sine_wave(200);
        let e = wave_energy(&traj, &DiffusionModel::constant(1.0, 0.0)).unwrap();
        let (lo, hi) = e.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!((hi - lo) / hi < 1e-2, "{lo} {hi}");
    }

    #[test]
    fn wave_from_zero_stays_zero() {
        let g = Grid::new(1.0, 50, 1.0, 100).unwrap();
        let t = solve_wave(&DiffusionModel::power(0.5), &g, &Field::zeros(g), 1.0).unwrap();
        assert!((0..t.n_levels()).all(|n| t.level(n).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn wave_rejects_strong_degeneracy_and_bad_data() {
        let g = Grid::new(1.0, 50, 1.0, 100).unwrap();
        assert!(solve_wave(&DiffusionModel::power(1.2), &g, &Field::zeros(g), 1.0).is_err());
        assert!(solve_wave(&DiffusionModel::power(0.5), &g, &g.sample(|x| 1.0 + x), 1.0).is_err());
    }

    #[test]
    fn equivalence_for_the_heat_eigenmode() {
        let g = Grid::new(1.0, 100, 1.0, 1000).unwrap();
        let e = verify_equivalence(
            &DiffusionModel::constant(1.0, 0.0),
            &g,
            |x| (PI * x).sin(),
            &[0.05, 0.1],
            &EquivalenceOptions::default(),
        )
        .unwrap();
        assert!(e.iter().all(|&v| v <= 1e-2), "{e:?}");
    }
}
