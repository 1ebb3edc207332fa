//! Measurement operators, synthetic targets and noise injection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interp_uniform, Field, Grid};
use crate::parabolic::{solve_parabolic_with, DegeneracyKind, DiffusionModel, SolverOptions, Source, Trajectory};

/// Weight multiplying `∂x u` in the interior flux channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `x ∂x u`
    Linear,
    /// `x² ∂x u`
    Square,
    /// `x^α ∂x u`
    Power(f64),
}

impl WeightKind {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            WeightKind::Linear => x,
            WeightKind::Square => x * x,
            WeightKind::Power(a) => x.powf(a),
        }
    }
}

/// Which data a synthetic target should contain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObservationKind {
    InteriorAtT0 { t0: f64, weight: WeightKind },
    BoundaryFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    /// Snapshot `γ ≈ ∂t u(·, t0)`, `β ≈ w(x) ∂x u(·, t0)`.
    InteriorAtT0 {
        t0: f64,
        gamma: Field,
        beta: Field,
        weight: WeightKind,
    },
    /// `η(t_n) ≈ ∂x u(ℓ, t_n)` for `n = 0..=nt`.
    BoundaryFlux { grid: Grid, eta: Vec<f64> },
}

impl Observation {
    /// Data channels in a fixed order.
    pub fn channels(&self) -> Vec<&[f64]> {
        match self {
            Observation::InteriorAtT0 { gamma, beta, .. } => vec![gamma.values(), beta.values()],
            Observation::BoundaryFlux { eta, .. } => vec![eta.as_slice()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.channels().iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    fn map_channels(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Observation {
        match self {
            Observation::InteriorAtT0 {
                t0,
                gamma,
                beta,
                weight,
            } => Observation::InteriorAtT0 {
                t0: *t0,
                gamma: Field::new(*gamma.grid(), f(0, gamma.values())).expect("finite"),
                beta: Field::new(*beta.grid(), f(1, beta.values())).expect("finite"),
                weight: *weight,
            },
            Observation::BoundaryFlux { grid, eta } => Observation::BoundaryFlux {
                grid: *grid,
                eta: f(0, eta),
            },
        }
    }

    /// Add the same constant to every channel.
    pub fn shifted(&self, eps: f64) -> Observation {
        self.map_channels(|_, c| c.iter().map(|v| v + eps).collect())
    }
}

fn derivative_at(u: &[f64], i: usize, dx: f64) -> f64 {
    let last = u.len() - 1;
    if i == 0 {
        (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
    } else if i == last {
        (3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * dx)
    } else {
        (u[i + 1] - u[i - 1]) / (2.0 * dx)
    }
}

/// `w(x) ∂x u` at every node: centred differences inside, second order
/// one-sided differences at the endpoints.
pub fn weighted_flux(u: &Field, weight: WeightKind) -> Field {
    let g = *u.grid();
    let dx = g.dx();
    let v = u.values();
    let values = (0..g.n_nodes())
        .map(|i| weight.eval(g.x(i)) * derivative_at(v, i, dx))
        .collect();
    Field::new(g, values).expect("finite")
}

/// Backward difference weights `w_k` (applied to level `n − k`, scaled by
/// `1/dt`) of the highest order usable at level `n`, capped at four.
fn backward_weights(n: usize) -> &'static [f64] {
    match n {
        1 => &[1.0, -1.0],
        2 => &[1.5, -2.0, 0.5],
        3 => &[11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0],
        _ => &[25.0 / 12.0, -4.0, 3.0, -4.0 / 3.0, 0.25],
    }
}

/// Time derivative at level `n` by a one-sided backward difference of
/// order `min(n, 4)`.
pub fn time_derivative(traj: &Trajectory, n: usize) -> Result<Field> {
    if n == 0 {
        return Err(Error::OutOfRange("no backward difference at the initial level".into()));
    }
    let dt = traj.grid().dt();
    let w = backward_weights(n);
    let cur = traj.level(n);
    let values: Vec<f64> = (0..cur.len())
        .map(|i| {
            // Differences against level n keep stationary data exactly zero.
            let s: f64 = w[1..]
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * (traj.level(n - 1 - k)[i] - cur[i]))
                .sum();
            s / dt
        })
        .collect();
    Field::new(*traj.grid(), values)
}

fn snap_level(grid: &Grid, t0: f64) -> Result<usize> {
    if !(t0 > 0.0 && t0 <= grid.t_final() * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange(format!("t0 = {t0} outside (0, {}]", grid.t_final())));
    }
    Ok(grid.nearest_level(t0).max(1))
}

/// Time level used for an interior measurement at `t0`.
pub fn interior_level(grid: &Grid, t0: f64) -> Result<usize> {
    snap_level(grid, t0)
}

/// `(γ, β)` at the time level nearest to `t0`.
pub fn measure_interior(traj: &Trajectory, t0: f64, weight: WeightKind) -> Result<(Field, Field)> {
    let n = snap_level(traj.grid(), t0)?;
    if n >= traj.n_levels() {
        return Err(Error::OutOfRange(format!("t0 = {t0} beyond the computed trajectory")));
    }
    let gamma = time_derivative(traj, n)?;
    let beta = weighted_flux(&traj.field(n), weight);
    Ok((gamma, beta))
}

/// `∂x u(ℓ, t_n)` by the one-sided stencil `(3u_{N+1} − 4u_N + u_{N−1})/(2dx)`.
pub fn measure_boundary_flux(traj: &Trajectory) -> Vec<f64> {
    let dx = traj.grid().dx();
    (0..traj.n_levels())
        .map(|n| {
            let u = traj.level(n);
            let last = u.len() - 1;
            (3.0 * u[last] - 4.0 * u[last - 1] + u[last - 2]) / (2.0 * dx)
        })
        .collect()
}

/// Forward model parameters shared by target generation and inversion.
#[derive(Debug, Clone)]
pub struct ForwardSetup {
    pub kind: DegeneracyKind,
    pub u0: fn(f64) -> f64,
    pub source: Source,
}

/// Generate a target on `data_grid`, measure it, and restrict the result to
/// `grid` by linear interpolation.
///
/// `data_grid` must be strictly finer than `grid` unless `allow_same_grid`
/// is set, which deliberately commits the inverse crime.
pub fn synthesize_on(
    model_true: &DiffusionModel,
    setup: &ForwardSetup,
    grid: &Grid,
    data_grid: &Grid,
    obs_kind: ObservationKind,
    allow_same_grid: bool,
) -> Result<Observation> {
    let finer = data_grid.nx() > grid.nx() && data_grid.nt() > grid.nt();
    let same = data_grid == grid;
    if !(finer || (same && allow_same_grid)) {
        return Err(Error::Incompatible(
            "data grid must be strictly finer than the inversion grid".into(),
        ));
    }
    if (data_grid.ell() - grid.ell()).abs() > 1e-12 || (data_grid.t_final() - grid.t_final()).abs() > 1e-12 {
        return Err(Error::Incompatible(
            "data and inversion grids cover different domains".into(),
        ));
    }
    let u0 = data_grid.sample(setup.u0);
    match obs_kind {
        ObservationKind::InteriorAtT0 { t0, weight } => {
            // Snap on the inversion grid so both sides use the same instant.
            let t_snap = grid.t(snap_level(grid, t0)?);
            let n = data_grid.nearest_level(t_snap);
            let opts = SolverOptions {
                last_level: Some(n),
                ..Default::default()
            };
            let traj = solve_parabolic_with(model_true, setup.kind, data_grid, &u0, &setup.source, &opts)?;
            let (gamma, beta) = measure_interior(&traj, t_snap, weight)?;
            Ok(Observation::InteriorAtT0 {
                t0: t_snap,
                gamma: gamma.resample(grid)?,
                beta: beta.resample(grid)?,
                weight,
            })
        }
        ObservationKind::BoundaryFlux => {
            let traj = solve_parabolic_with(
                model_true,
                setup.kind,
                data_grid,
                &u0,
                &setup.source,
                &SolverOptions::default(),
            )?;
            let eta_fine = measure_boundary_flux(&traj);
            let eta = grid
                .times()
                .into_iter()
                .map(|t| interp_uniform(&eta_fine, data_grid.dt(), t))
                .collect();
            Ok(Observation::BoundaryFlux { grid: *grid, eta })
        }
    }
}

/// Target generated on the 2x-space / 4x-time refinement of `grid`.
pub fn synthesize(
    model_true: &DiffusionModel,
    setup: &ForwardSetup,
    grid: &Grid,
    obs_kind: ObservationKind,
) -> Result<Observation> {
    let data_grid = grid.refined(2, 4)?;
    synthesize_on(model_true, setup, grid, &data_grid, obs_kind, false)
}

/// Uniform additive noise, scaled per channel by its sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::OutOfRange(format!("noise level must be >= 0, got {level}")));
        }
        Ok(Self { level, seed })
    }
}

/// `d + p ‖d‖∞ U` with `U ~ Uniform(−1, 1)` i.i.d. per sample.
pub fn add_noise(obs: &Observation, spec: NoiseSpec) -> Observation {
    if spec.level == 0.0 {
        return obs.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    obs.map_channels(|_, c| {
        let scale = spec.level * c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        c.iter().map(|v| v + scale * rng.gen_range(-1.0..1.0)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l2_norm_sq;
    use crate::parabolic::solve_parabolic;
    use std::f64::consts::PI;

    fn frozen(grid: Grid, f: impl Fn(f64) -> f64) -> Trajectory {
        let level: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        let values = level.repeat(grid.nt() + 1);
        Trajectory::new(grid, values).unwrap()
    }

    #[test]
    fn stationary_trajectory_has_zero_gamma() {
        let g = Grid::new(1.0, 50, 1.0, 20).unwrap();
        let t = frozen(g, |x| x * (1.0 - x));
        let (gamma, _) = measure_interior(&t, 0.5, WeightKind::Linear).unwrap();
        assert!(gamma.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_parabola_beta() {
        let g = Grid::new(1.0, 50, 1.0, 20).unwrap();
        let t = frozen(g, |x| x * (1.0 - x));
        let (_, beta) = measure_interior(&t, 0.5, WeightKind::Linear).unwrap();
        for (i, b) in beta.values().iter().enumerate() {
            let x = g.x(i);
            assert!((b - x * (1.0 - 2.0 * x)).abs() < 1e-6);
        }
    }

    #[test]
    fn t0_outside_horizon_is_rejected() {
        let g = Grid::new(1.0, 10, 1.0, 10).unwrap();
        let t = frozen(g, |x| x);
        assert!(measure_interior(&t, 0.0, WeightKind::Linear).is_err());
        assert!(measure_interior(&t, 1.5, WeightKind::Linear).is_err());
    }

    #[test]
    fn eigenmode_gamma() {
        let g = Grid::new(1.0, 200, 0.1, 400).unwrap();
        let u0 = g.sample(|x| (PI * x).sin());
        let traj = solve_parabolic(
            &DiffusionModel::constant(1.0, 0.0),
            DegeneracyKind::NonDegenerate,
            &g,
            &u0,
            &Source::Zero,
        )
        .unwrap();
        let (gamma, _) = measure_interior(&traj, 0.1, WeightKind::Linear).unwrap();
        let exact = g.sample(|x| -PI * PI * (-PI * PI * 0.1_f64).exp() * (PI * x).sin());
        let rel = (l2_norm_sq(&gamma.sub(&exact).unwrap()).unwrap() / l2_norm_sq(&exact).unwrap()).sqrt();
        assert!(rel < 1e-2, "{rel}");
    }

    #[test]
    fn boundary_flux_examples() {
        let g = Grid::new(1.0, 200, 1.0, 10).unwrap();
        assert!(measure_boundary_flux(&frozen(g, |_| 0.0)).iter().all(|&v| v == 0.0));
        let eta = measure_boundary_flux(&frozen(g, |x| (PI * x).sin()));
        assert!(eta.iter().all(|v| (v + PI).abs() < 1e-3));
        let eta = measure_boundary_flux(&frozen(g, |x| x * x));
        assert!(eta.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    fn zero_setup() -> ForwardSetup {
        ForwardSetup {
            kind: DegeneracyKind::Strong,
            u0: |_| 0.0,
            source: Source::Zero,
        }
    }

    #[test]
    fn zero_inputs_give_zero_observations() {
        let g = Grid::new(1.0, 20, 1.0, 20).unwrap();
        let m = DiffusionModel::constant(1.7, 1.0);
        for kind in [
            ObservationKind::BoundaryFlux,
            ObservationKind::InteriorAtT0 {
                t0: 0.2,
                weight: WeightKind::Linear,
            },
        ] {
            let obs = synthesize(&m, &zero_setup(), &g, kind).unwrap();
            assert!(obs.is_zero());
        }
    }

    #[test]
    fn same_grid_needs_explicit_opt_in() {
        let g = Grid::new(1.0, 20, 1.0, 20).unwrap();
        let m = DiffusionModel::constant(1.7, 1.0);
        assert!(synthesize_on(&m, &zero_setup(), &g, &g, ObservationKind::BoundaryFlux, false).is_err());
        assert!(synthesize_on(&m, &zero_setup(), &g, &g, ObservationKind::BoundaryFlux, true).is_ok());
    }

    fn sample_obs() -> Observation {
        let g = Grid::new(1.0, 30, 1.0, 20).unwrap();
        Observation::InteriorAtT0 {
            t0: 0.2,
            gamma: g.sample(|x| (3.0 * x).sin()),
            beta: g.sample(|x| x * x - 0.3),
            weight: WeightKind::Linear,
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let obs = sample_obs();
        assert_eq!(add_noise(&obs, NoiseSpec::new(0.0, 7).unwrap()), obs);
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let obs = sample_obs();
        let a = add_noise(&obs, NoiseSpec::new(0.01, 42).unwrap());
        let b = add_noise(&obs, NoiseSpec::new(0.01, 42).unwrap());
        let c = add_noise(&obs, NoiseSpec::new(0.01, 43).unwrap());
        assert_eq!(a, b);
        let mut max_diff = 0.0_f64;
        for ((clean, noisy), other) in obs.channels().iter().zip(a.channels()).zip(c.channels()) {
            let sup = clean.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for i in 0..clean.len() {
                assert!((noisy[i] - clean[i]).abs() <= 0.01 * sup);
                max_diff = max_diff.max((noisy[i] - other[i]).abs());
            }
        }
        assert!(max_diff > 0.0);
        assert!(NoiseSpec::new(-0.1, 1).is_err());
    }
}
