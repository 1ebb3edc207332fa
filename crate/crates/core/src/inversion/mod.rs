//! Least-squares identification of the diffusion coefficient.

mod optimizer;
mod order;

pub use optimizer::{gradient_fd, minimize_box, BfgsOptions, Bounds, InversionResult, Termination};
pub use order::{estimate_order, OrderFit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, weighted_h1_seminorm_sq, Grid};
use crate::observations::{
    add_noise, interior_level, measure_boundary_flux, measure_interior, ForwardSetup, NoiseSpec, Observation,
};
use crate::parabolic::{solve_parabolic_with, DiffusionModel, Profile, SolverOptions, Trajectory};

/// Which coefficients are free; the variant carries the fixed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `params = [a]`, coefficient `x^α a`.
    ConstantA { alpha: f64 },
    /// `params = [α]`, coefficient `x^α a(x)`.
    Alpha { profile: Profile },
    /// `params = [b, c]`, coefficient `x^α (b x + c)`.
    Affine { alpha: f64 },
    /// `params = [b, c, h]`, coefficient `x^α (b x² + c x + h)`.
    Quadratic { alpha: f64 },
    /// `params = [α, b, c, h]`.
    AlphaQuadratic,
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::ConstantA { .. } | Family::Alpha { .. } => 1,
            Family::Affine { .. } => 2,
            Family::Quadratic { .. } => 3,
            Family::AlphaQuadratic => 4,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::ConstantA { .. } => &["a"],
            Family::Alpha { .. } => &["alpha"],
            Family::Affine { .. } => &["b", "c"],
            Family::Quadratic { .. } => &["b", "c", "h"],
            Family::AlphaQuadratic => &["alpha", "b", "c", "h"],
        }
    }

    pub fn model(&self, params: &[f64]) -> Result<DiffusionModel> {
        if params.len() != self.dim() {
            return Err(Error::Incompatible(format!(
                "{} parameters given, family has {}",
                params.len(),
                self.dim()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        let p = params;
        Ok(match self {
            Family::ConstantA { alpha } => DiffusionModel::constant(p[0], *alpha),
            Family::Alpha { profile } => DiffusionModel::power_profile(p[0], profile.clone()),
            Family::Affine { alpha } => DiffusionModel::power_profile(*alpha, Profile::Affine { b: p[0], c: p[1] }),
            Family::Quadratic { alpha } => DiffusionModel::power_profile(
                *alpha,
                Profile::Quadratic {
                    b: p[0],
                    c: p[1],
                    h: p[2],
                },
            ),
            Family::AlphaQuadratic => DiffusionModel::power_profile(
                p[0],
                Profile::Quadratic {
                    b: p[1],
                    c: p[2],
                    h: p[3],
                },
            ),
        })
    }
}

#[derive(Debug, Clone)]
pub struct InverseProblemSpec {
    pub family: Family,
    pub bounds: Vec<Bounds>,
    pub initial: Vec<f64>,
    pub setup: ForwardSetup,
    pub grid: Grid,
    pub observation: Observation,
    /// Forward solver settings; `last_level` is managed by the cost functionals.
    pub solver: SolverOptions,
    pub options: BfgsOptions,
}

impl InverseProblemSpec {
    pub fn new(
        family: Family,
        bounds: Vec<Bounds>,
        initial: Vec<f64>,
        setup: ForwardSetup,
        grid: Grid,
        observation: Observation,
    ) -> Result<Self> {
        let spec = Self {
            family,
            bounds,
            initial,
            setup,
            grid,
            observation,
            solver: SolverOptions::default(),
            options: BfgsOptions::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.family.dim();
        if self.bounds.len() != dim || self.initial.len() != dim {
            return Err(Error::Incompatible(format!(
                "family needs {dim} bounds and initial values"
            )));
        }
        for (k, (p, b)) in self.initial.iter().zip(&self.bounds).enumerate() {
            if !b.strictly_contains(*p) {
                return Err(Error::OutOfRange(format!(
                    "initial value {p} of parameter {k} not strictly inside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        let compatible = match &self.observation {
            Observation::InteriorAtT0 { gamma, beta, .. } => *gamma.grid() == self.grid && *beta.grid() == self.grid,
            Observation::BoundaryFlux { grid, eta } => *grid == self.grid && eta.len() == self.grid.nt() + 1,
        };
        if !compatible {
            return Err(Error::Incompatible(
                "observation does not live on the inversion grid".into(),
            ));
        }
        Ok(())
    }

    pub fn with_observation(&self, observation: Observation) -> Self {
        Self {
            observation,
            ..self.clone()
        }
    }

    fn solve(&self, params: &[f64], last_level: Option<usize>) -> Result<Trajectory> {
        let model = self.family.model(params)?;
        let u0 = self.grid.sample(self.setup.u0);
        let opts = SolverOptions {
            last_level,
            ..self.solver
        };
        solve_parabolic_with(&model, self.setup.kind, &self.grid, &u0, &self.setup.source, &opts)
    }

    /// Either cost functional, dispatched on the observation type.
    pub fn cost(&self, params: &[f64]) -> Result<f64> {
        match self.observation {
            Observation::InteriorAtT0 { .. } => cost_interior(params, self),
            Observation::BoundaryFlux { .. } => cost_boundary(params, self),
        }
    }
}

fn half_squared_residual(model: &[f64], data: &[f64], h: f64) -> f64 {
    let sq: Vec<f64> = model.iter().zip(data).map(|(m, d)| (m - d).powi(2)).collect();
    0.5 * trapezoid(&sq, h)
}

/// `½∫|γ − ∂t u(·, t0)|² + ½∫|β − w ∂x u(·, t0)|²` over `(0, ℓ)`.
pub fn cost_interior(params: &[f64], spec: &InverseProblemSpec) -> Result<f64> {
    let Observation::InteriorAtT0 {
        t0,
        gamma,
        beta,
        weight,
    } = &spec.observation
    else {
        return Err(Error::Incompatible("cost_interior needs interior data".into()));
    };
    let n0 = interior_level(&spec.grid, *t0)?;
    let traj = spec.solve(params, Some(n0))?;
    let (g, b) = measure_interior(&traj, *t0, *weight)?;
    let dx = spec.grid.dx();
    Ok(half_squared_residual(g.values(), gamma.values(), dx) + half_squared_residual(b.values(), beta.values(), dx))
}

/// `½∫|η − ∂x u(ℓ, ·)|²` over `(0, T)`.
pub fn cost_boundary(params: &[f64], spec: &InverseProblemSpec) -> Result<f64> {
    let Observation::BoundaryFlux { eta, .. } = &spec.observation else {
        return Err(Error::Incompatible("cost_boundary needs boundary flux data".into()));
    };
    let traj = spec.solve(params, None)?;
    let model_eta = measure_boundary_flux(&traj);
    Ok(half_squared_residual(&model_eta, eta, spec.grid.dt()))
}

/// Finite-difference gradient of the spec's cost functional.
pub fn gradient(params: &[f64], spec: &InverseProblemSpec) -> Result<Vec<f64>> {
    gradient_fd(&|p: &[f64]| spec.cost(p), params, &spec.bounds)
}

/// Threshold below which hypothesis (LB) is considered violated.
pub const MU_MIN: f64 = 1e-8;

/// `∫ x^α |∂x u(·, t0)|²` of the forward solution for `params`.
pub fn interior_energy(params: &[f64], spec: &InverseProblemSpec) -> Result<f64> {
    let Observation::InteriorAtT0 { t0, .. } = &spec.observation else {
        return Err(Error::Incompatible("interior energy needs interior data".into()));
    };
    let n0 = interior_level(&spec.grid, *t0)?;
    let traj = spec.solve(params, Some(n0))?;
    let alpha = spec.family.model(params)?.alpha;
    weighted_h1_seminorm_sq(&traj.field(n0), alpha)
}

/// Run projected BFGS from the spec's initial guess.
pub fn minimize(spec: &InverseProblemSpec) -> Result<InversionResult> {
    spec.validate()?;
    let f = |p: &[f64]| spec.cost(p);
    let grad = |p: &[f64]| gradient_fd(&f, p, &spec.bounds);
    let mut result = minimize_box(&f, &grad, &spec.initial, &spec.bounds, &spec.options)?;

    if spec.observation.is_zero() {
        result.warnings.push("observation is identically zero".into());
    }
    if result.iterations == 0 && result.projected_gradient_norm == 0.0 {
        result.warnings.push("zero gradient at the initial guess".into());
    }
    if matches!(spec.observation, Observation::InteriorAtT0 { .. }) {
        let mu = interior_energy(&result.params, spec)?;
        if mu < MU_MIN {
            result.warnings.push(format!(
                "lower bound hypothesis fails: weighted energy at t0 is {mu:.3e}"
            ));
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: f64,
    pub seed: u64,
    pub cost: f64,
    pub iterations: usize,
    pub params: Vec<f64>,
    pub termination: Termination,
}

/// Noise levels of the published tables, as fractions.
pub const PAPER_NOISE_LEVELS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 0.0];

/// One minimization per `(level, seed)`, rows ordered level-major.
///
/// `spec.observation` must be the clean target.
pub fn noise_sweep(spec: &InverseProblemSpec, levels: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, u64)> = levels
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    jobs.par_iter()
        .map(|&(level, seed)| {
            let noisy = add_noise(&spec.observation, NoiseSpec::new(level, seed)?);
            let r = minimize(&spec.with_observation(noisy))?;
            Ok(SweepRow {
                level,
                seed,
                cost: r.cost,
                iterations: r.iterations,
                params: r.params,
                termination: r.termination,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::{synthesize_on, ObservationKind, WeightKind};
    use crate::parabolic::{DegeneracyKind, Source};

    fn small_spec(obs_kind: ObservationKind, same_grid: bool) -> InverseProblemSpec {
        let grid = Grid::new(1.0, 40, 1.0, 80).unwrap();
        let setup = ForwardSetup {
            kind: DegeneracyKind::Strong,
            u0: |x| 0.5 * x * x * (1.0 - x),
            source: Source::Zero,
        };
        let data_grid = if same_grid { grid } else { grid.refined(2, 4).unwrap() };
        let obs = synthesize_on(
            &DiffusionModel::constant(1.7, 1.0),
            &setup,
            &grid,
            &data_grid,
            obs_kind,
            same_grid,
        )
        .unwrap();
        InverseProblemSpec::new(
            Family::ConstantA { alpha: 1.0 },
            vec![Bounds::new(0.1, 3.0).unwrap()],
            vec![0.7],
            setup,
            grid,
            obs,
        )
        .unwrap()
    }

    const INTERIOR: ObservationKind = ObservationKind::InteriorAtT0 {
        t0: 0.2,
        weight: WeightKind::Linear,
    };

    #[test]
    fn self_residual_vanishes() {
        for kind in [INTERIOR, ObservationKind::BoundaryFlux] {
            let spec = small_spec(kind, true);
            assert!(spec.cost(&[1.7]).unwrap() <= 1e-20);
            assert!(spec.cost(&[0.7]).unwrap() > 1e-6);
        }
    }

    #[test]
    fn wrong_functional_is_rejected() {
        let spec = small_spec(INTERIOR, true);
        assert!(cost_boundary(&[1.0], &spec).is_err());
        let spec = small_spec(ObservationKind::BoundaryFlux, true);
        assert!(cost_interior(&[1.0], &spec).is_err());
    }

    #[test]
    fn initial_guess_must_be_interior() {
        let spec = small_spec(INTERIOR, true);
        let mut bad = spec.clone();
        bad.initial = vec![0.1];
        assert!(bad.validate().is_err());
        bad.initial = vec![1.0, 2.0];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn recovers_a_on_a_small_grid() {
        for kind in [INTERIOR, ObservationKind::BoundaryFlux] {
            let r = minimize(&small_spec(kind, false)).unwrap();
            assert!((r.params[0] - 1.7).abs() < 1e-2, "{r:?}");
            assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        }
    }

    #[test]
    fn family_models() {
        let m = Family::Quadratic { alpha: 0.6 }.model(&[4.0, 3.0, 1.0]).unwrap();
        assert_eq!(m.alpha, 0.6);
        assert_eq!(m.profile.eval(0.5), Some(3.5));
        assert!(Family::Affine { alpha: 0.6 }.model(&[1.0]).is_err());
        assert!(Family::ConstantA { alpha: 1.0 }.model(&[f64::NAN]).is_err());
    }
}
