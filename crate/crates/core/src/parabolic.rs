//! Forward solver for `∂t u − ∂x(x^α a(x) ∂x u) = f` on `(0, ℓ)`.
//!
//! The spatial operator is the conservative three-point scheme
//!
//! ```text
//! (L u)_i = [κ_{i+1/2}(u_{i+1} − u_i) − κ_{i−1/2}(u_i − u_{i−1})] / dx²
//! ```
//!
//! with `κ_{i+1/2} = x_{i+1/2}^α a(x_{i+1/2})` (see [`cell_conductances`]
//! for the weakly degenerate first cell). Dirichlet nodes are pinned
//! to zero. Under strong degeneracy node 0 is a free unknown owning the half
//! cell `[0, dx/2]`; no flux crosses `x = 0`, so its balance reads
//! `(dx/2) du_0/dt = κ_{1/2}(u_1 − u_0)/dx`.
//!
//! Time stepping is the third order SDIRK of Alexander by default. The first steps are subdivided on a
//! graded mesh `t_j ∝ j⁴` so the corner layer produced by initial data that
//! do not satisfy `∂x(κ ∂x u0) = 0` at a Dirichlet end is resolved.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l2_norm_sq, Field, Grid};
use crate::tridiag;

/// Boundary regime at the degenerate endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyKind {
    /// `α = 0`, Dirichlet at both ends.
    NonDegenerate,
    /// `α ∈ (0, 1)`, Dirichlet at both ends.
    Weak,
    /// `α ∈ [1, 2)`, zero flux `x^α ∂x u = 0` at `x = 0`, Dirichlet at `ℓ`.
    Strong,
}

impl DegeneracyKind {
    pub fn check_alpha(self, alpha: f64) -> Result<()> {
        let ok = match self {
            Self::NonDegenerate => alpha == 0.0,
            Self::Weak => alpha > 0.0 && alpha < 1.0,
            Self::Strong => (1.0..2.0).contains(&alpha),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "alpha = {alpha} is incompatible with {self:?} degeneracy"
            )))
        }
    }

    /// Regime implied by a power.
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha == 0.0 {
            Self::NonDegenerate
        } else if alpha < 1.0 {
            Self::Weak
        } else {
            Self::Strong
        }
    }

    pub fn pins_origin(self) -> bool {
        !matches!(self, Self::Strong)
    }
}

/// Spatial profile `a(x)` multiplying `x^α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Constant(f64),
    /// `a(x) = b x + c`
    Affine {
        b: f64,
        c: f64,
    },
    /// `a(x) = b x² + c x + h`
    Quadratic {
        b: f64,
        c: f64,
        h: f64,
    },
    /// Values at the half nodes of one particular grid.
    Tabulated(Vec<f64>),
}

impl Profile {
    /// Point evaluation; `None` for tabulated profiles.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match *self {
            Profile::Constant(a) => Some(a),
            Profile::Affine { b, c } => Some(b * x + c),
            Profile::Quadratic { b, c, h } => Some((b * x + c) * x + h),
            Profile::Tabulated(_) => None,
        }
    }
}

/// The diffusion coefficient `x^α a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub alpha: f64,
    pub profile: Profile,
}

impl DiffusionModel {
    pub fn constant(a: f64, alpha: f64) -> Self {
        Self {
            alpha,
            profile: Profile::Constant(a),
        }
    }

    /// Pure power `x^α` (profile `a ≡ 1`).
    pub fn power(alpha: f64) -> Self {
        Self::constant(1.0, alpha)
    }

    pub fn power_profile(alpha: f64, profile: Profile) -> Self {
        Self { alpha, profile }
    }
}

/// `κ_{i+1/2} = x_{i+1/2}^α a(x_{i+1/2})` for `i = 0..=nx`.
pub fn coefficient_at_half_nodes(model: &DiffusionModel, grid: &Grid) -> Result<Vec<f64>> {
    if !(0.0..2.0).contains(&model.alpha) {
        return Err(Error::OutOfRange(format!(
            "alpha must lie in [0, 2), got {}",
            model.alpha
        )));
    }
    let xs = grid.half_nodes();
    let a: Vec<f64> = match &model.profile {
        Profile::Tabulated(v) => {
            if v.len() != xs.len() {
                return Err(Error::Incompatible(format!(
                    "tabulated profile has {} values, grid has {} half nodes",
                    v.len(),
                    xs.len()
                )));
            }
            v.clone()
        }
        p => xs.iter().map(|&x| p.eval(x).expect("analytic profile")).collect(),
    };
    xs.iter()
        .zip(a)
        .map(|(&x, a)| {
            let k = x.powf(model.alpha) * a;
            if k > 0.0 && k.is_finite() {
                Ok(k)
            } else {
                Err(Error::NonPositiveCoefficient { x, value: k })
            }
        })
        .collect()
}

/// Face coefficients used by the solvers.
///
/// With a pinned origin the power factor is integrated exactly over each
/// cell, `κ_{i+1/2} = a(x_{i+1/2}) dx / ∫ x^{−α} dx`, so the discrete flux is
/// exact for the singular local profile `x^{1−α}` of the weakly degenerate
/// problem. Under strong degeneracy the solution is regular enough for the
/// point values of [`coefficient_at_half_nodes`].
pub fn cell_conductances(model: &DiffusionModel, grid: &Grid, kind: DegeneracyKind) -> Result<Vec<f64>> {
    let point = coefficient_at_half_nodes(model, grid)?;
    let alpha = model.alpha;
    if alpha == 0.0 || !kind.pins_origin() {
        return Ok(point);
    }
    let dx = grid.dx();
    let s = 1.0 - alpha;
    Ok(point
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let a = k / grid.x_half(i).powf(alpha);
            let integral = if i == 0 {
                dx.powf(s) / s
            } else {
                // x_i^{1−α} (r^{1−α} − 1)/(1 − α) with r = x_{i+1}/x_i
                let x0 = grid.x(i);
                let ln_r = (grid.x(i + 1) / x0).ln();
                x0.powf(s) * (s * ln_r).exp_m1() / s
            };
            a * dx / integral
        })
        .collect())
}

/// Source term `f(x, t)`.
#[derive(Clone, Default)]
pub enum Source {
    #[default]
    Zero,
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Source {
    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Source::Function(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Zero)
    }

    fn sample(&self, grid: &Grid, t: f64, out: &mut [f64]) -> Result<()> {
        match self {
            Source::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Source::Function(f) => {
                for (i, v) in out.iter_mut().enumerate() {
                    *v = f(grid.x(i), t);
                    if !v.is_finite() {
                        return Err(Error::NonFinite("source term"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Zero => f.write_str("Source::Zero"),
            Source::Function(_) => f.write_str("Source::Function(..)"),
        }
    }
}

/// Discrete solution: `nt + 1` time levels of `nx + 2` nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.nt() + 1) * grid.n_nodes() {
            return Err(Error::Incompatible("trajectory size does not match its grid".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_levels(&self) -> usize {
        self.grid.nt() + 1
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.n_nodes();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn field(&self, n: usize) -> Field {
        Field::new(self.grid, self.level(n).to_vec()).expect("levels are validated")
    }

    pub fn last(&self) -> Field {
        self.field(self.grid.nt())
    }

    /// Time series of node `i`.
    pub fn node_series(&self, i: usize) -> Vec<f64> {
        (0..self.n_levels()).map(|n| self.level(n)[i]).collect()
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TimeScheme {
    ImplicitEuler,
    /// Crank–Nicolson, started with four implicit Euler half steps.
    CrankNicolson,
    /// Trapezoidal stage to `t + γh` followed by BDF2, `γ = 2 − √2`.
    /// Second order and L-stable.
    TrBdf2,
    /// Three-stage singly diagonally implicit Runge–Kutta of Alexander,
    /// third order, L-stable and stiffly accurate.
    #[default]
    Sdirk3,
}

/// Alexander's SDIRK3 diagonal `γ`, root of `γ³ − 3γ² + 3γ/2 − 1/6` in `(1/6, 1/2)`.
const SDIRK3_GAMMA: f64 = 0.435_866_521_508_458_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub scheme: TimeScheme,
    /// Stop after this many steps instead of `grid.nt()`.
    pub last_level: Option<usize>,
    /// Number of leading time steps covered by a graded sub-mesh.
    pub graded_levels: usize,
    /// Points of the graded sub-mesh `t_j = t_g (j/J)^4`, `j = 1..J`.
    pub graded_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::default(),
            last_level: None,
            graded_levels: 16,
            graded_points: 64,
        }
    }
}

/// Grading exponent of the start-up sub-mesh.
const GRADING: i32 = 4;

impl SolverOptions {
    /// Uniform steps only.
    pub fn uniform(scheme: TimeScheme) -> Self {
        Self {
            scheme,
            graded_levels: 0,
            graded_points: 0,
            ..Default::default()
        }
    }

    /// Interior sub-step times of step `n → n + 1`.
    fn substeps(&self, grid: &Grid, n: usize) -> Vec<f64> {
        if n >= self.graded_levels || self.graded_points == 0 {
            return Vec::new();
        }
        let (t0, t1) = (grid.t(n), grid.t(n + 1));
        let tg = grid.t(self.graded_levels.min(grid.nt()));
        let eps = 1e-12 * grid.dt();
        (1..self.graded_points)
            .map(|j| tg * (j as f64 / self.graded_points as f64).powi(GRADING))
            .filter(|&s| s > t0 + eps && s < t1 - eps)
            .collect()
    }
}

/// Assembled three-point operator over the free unknowns.
struct Operator {
    first: usize,
    last: usize,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    fn new(kappa: &[f64], grid: &Grid, kind: DegeneracyKind) -> Self {
        let nx = grid.nx();
        let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
        let first = if kind.pins_origin() { 1 } else { 0 };
        let n = nx + 1 - first;
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (r, i) in (first..=nx).enumerate() {
            if i == 0 {
                upper[r] = 2.0 * kappa[0] * inv_dx2;
                diag[r] = -upper[r];
            } else {
                lower[r] = kappa[i - 1] * inv_dx2;
                upper[r] = kappa[i] * inv_dx2;
                diag[r] = -(lower[r] + upper[r]);
            }
        }
        Self {
            first,
            last: nx,
            lower,
            diag,
            upper,
        }
    }

    /// `(L u)` on the free nodes, using the full nodal vector `u`.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (r, i) in (self.first..=self.last).enumerate() {
            let mut v = self.diag[r] * u[i] + self.upper[r] * u[i + 1];
            if i > 0 {
                v += self.lower[r] * u[i - 1];
            }
            out[r] = v;
        }
    }

    /// One θ-step of size `h` from `prev` into `next`.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        theta: f64,
        h: f64,
        prev: &[f64],
        f_old: &[f64],
        f_new: &[f64],
        next: &mut [f64],
        scratch: &mut [f64],
    ) {
        let n = self.diag.len();
        let mut rhs = vec![0.0; n];
        if theta < 1.0 {
            self.apply(prev, scratch);
        }
        for (r, i) in (self.first..=self.last).enumerate() {
            let mut v = prev[i] + h * (theta * f_new[i] + (1.0 - theta) * f_old[i]);
            if theta < 1.0 {
                v += (1.0 - theta) * h * scratch[r];
            }
            rhs[r] = v;
        }
        let lower: Vec<f64> = self.lower.iter().map(|l| -theta * h * l).collect();
        let upper: Vec<f64> = self.upper.iter().map(|u| -theta * h * u).collect();
        let diag: Vec<f64> = self.diag.iter().map(|d| 1.0 - theta * h * d).collect();
        tridiag::solve(&lower, &diag, &upper, &mut rhs);
        next.iter_mut().for_each(|v| *v = 0.0);
        next[self.first..=self.last].copy_from_slice(&rhs);
    }
}

/// One SDIRK3 step from `cur` at `t` to `next` at `t + h`.
#[allow(clippy::too_many_arguments)]
fn sdirk3_step(
    op: &Operator,
    grid: &Grid,
    source: &Source,
    t: f64,
    h: f64,
    cur: &[f64],
    next: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let g = SDIRK3_GAMMA;
    let c2 = 0.5 * (1.0 + g);
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    let a: [[f64; 2]; 3] = [[0.0, 0.0], [c2 - g, 0.0], [b1, b2]];
    let c = [g, c2, 1.0];
    let m = cur.len();
    let zero = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut prev = vec![0.0; m];
    let mut stage = vec![0.0; m];
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(2);
    for i in 0..3 {
        source.sample(grid, t + c[i] * h, &mut f)?;
        prev.copy_from_slice(cur);
        for (j, kj) in k.iter().enumerate() {
            prev.iter_mut().zip(kj).for_each(|(p, v)| *p += h * a[i][j] * v);
        }
        op.step(1.0, g * h, &prev, &zero, &f, &mut stage, scratch);
        if i < 2 {
            // Stage slope from the implicit relation U = prev + γh K.
            k.push(stage.iter().zip(&prev).map(|(u, p)| (u - p) / (g * h)).collect());
        }
    }
    next.copy_from_slice(&stage);
    Ok(())
}

/// Solve the parabolic problem over the whole time axis of `grid` with the
/// default scheme.
pub fn solve_parabolic(
    model: &DiffusionModel,
    kind: DegeneracyKind,
    grid: &Grid,
    u0: &Field,
    source: &Source,
) -> Result<Trajectory> {
    solve_parabolic_with(model, kind, grid, u0, source, &SolverOptions::default())
}

/// Solve with explicit options.
///
/// Dirichlet nodes are pinned to zero from the first step on; if `u0` does
/// not vanish there the jump is absorbed in the first (implicit) steps and
/// row 0 of the trajectory still holds `u0` unchanged.
pub fn solve_parabolic_with(
    model: &DiffusionModel,
    kind: DegeneracyKind,
    grid: &Grid,
    u0: &Field,
    source: &Source,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    kind.check_alpha(model.alpha)?;
    if u0.grid() != grid {
        return Err(Error::Incompatible("initial field lives on a different grid".into()));
    }
    let out_grid = match opts.last_level {
        Some(n) => grid.truncated(n)?,
        None => *grid,
    };
    let kappa = cell_conductances(model, grid, kind)?;
    let op = Operator::new(&kappa, grid, kind);

    let m = grid.n_nodes();
    let steps = out_grid.nt();
    let mut values = vec![0.0; (steps + 1) * m];
    values[..m].copy_from_slice(u0.values());

    let mut f_old = vec![0.0; m];
    let mut f_mid = vec![0.0; m];
    let mut f_new = vec![0.0; m];
    let mut scratch = vec![0.0; op.diag.len()];
    let mut cur = u0.values().to_vec();
    let mut mid = vec![0.0; m];
    let mut next = vec![0.0; m];
    // Crank–Nicolson starts with two steps split into implicit Euler halves
    // to damp the stiff modes excited by rough initial data.
    let mut rannacher_left = match opts.scheme {
        TimeScheme::CrankNicolson => 2,
        _ => 0,
    };
    let gamma = 2.0 - std::f64::consts::SQRT_2;
    let d = (1.0 - gamma) / (2.0 - gamma);
    let (w_star, w_old) = (
        1.0 / (gamma * (2.0 - gamma)),
        (1.0 - gamma).powi(2) / (gamma * (2.0 - gamma)),
    );
    source.sample(grid, 0.0, &mut f_old)?;
    for n in 0..steps {
        let mut times = opts.substeps(grid, n);
        times.push(grid.t(n + 1));
        let mut t_old = grid.t(n);
        for t_new in times {
            let h = t_new - t_old;
            source.sample(grid, t_new, &mut f_new)?;
            if opts.scheme == TimeScheme::ImplicitEuler {
                op.step(1.0, h, &cur, &f_old, &f_new, &mut next, &mut scratch);
            } else if opts.scheme == TimeScheme::TrBdf2 {
                source.sample(grid, t_old + gamma * h, &mut f_mid)?;
                op.step(0.5, gamma * h, &cur, &f_old, &f_mid, &mut mid, &mut scratch);
                mid.iter_mut().zip(&cur).for_each(|(s, u)| *s = w_star * *s - w_old * u);
                op.step(1.0, d * h, &mid, &f_mid, &f_new, &mut next, &mut scratch);
            } else if opts.scheme == TimeScheme::Sdirk3 {
                sdirk3_step(&op, grid, source, t_old, h, &cur, &mut next, &mut scratch)?;
            } else if rannacher_left > 0 {
                rannacher_left -= 1;
                source.sample(grid, t_old + 0.5 * h, &mut f_mid)?;
                op.step(1.0, 0.5 * h, &cur, &f_old, &f_mid, &mut mid, &mut scratch);
                op.step(1.0, 0.5 * h, &mid, &f_mid, &f_new, &mut next, &mut scratch);
            } else {
                op.step(0.5, h, &cur, &f_old, &f_new, &mut next, &mut scratch);
            }
            std::mem::swap(&mut cur, &mut next);
            std::mem::swap(&mut f_old, &mut f_new);
            t_old = t_new;
        }
        values[(n + 1) * m..(n + 2) * m].copy_from_slice(&cur);
    }
    Trajectory::new(out_grid, values)
}

/// Outcome of the discrete contraction check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipativity {
    pub contractive: bool,
    /// Largest growth `‖u^{n+1}‖ − ‖u^n‖` observed (0 when none).
    pub max_violation: f64,
}

/// Checks `‖u^{n+1}‖ ≤ ‖u^n‖ (1 + 1e−10)` for every step of an unforced run.
pub fn dissipativity_check(traj: &Trajectory) -> Dissipativity {
    let norms: Vec<f64> = (0..traj.n_levels())
        .map(|n| l2_norm_sq(&traj.field(n)).expect("finite").sqrt())
        .collect();
    let mut contractive = true;
    let mut max_violation = 0.0_f64;
    for w in norms.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-10) {
            contractive = false;
        }
        max_violation = max_violation.max(w[1] - w[0]);
    }
    Dissipativity {
        contractive,
        max_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_node_coefficient_examples() {
        let g = Grid::new(1.0, 200, 1.0, 10).unwrap();
        let k = coefficient_at_half_nodes(&DiffusionModel::constant(1.0, 0.0), &g).unwrap();
        assert!(k.iter().all(|&v| v == 1.0));

        // dx = 0.25 would need nx = 3, below the minimum mesh; dx = 1/12
        // keeps 0.125, 0.375, 0.625, 0.875 among its half nodes.
        let g = Grid::new(1.0, 11, 1.0, 10).unwrap();
        let k = coefficient_at_half_nodes(&DiffusionModel::power(1.0), &g).unwrap();
        for (i, v) in k.iter().enumerate() {
            assert!((v - (i as f64 + 0.5) / 12.0).abs() < 1e-15);
        }
        for (i, x) in [(1, 0.125), (4, 0.375), (7, 0.625), (10, 0.875)] {
            assert!((k[i] - x).abs() < 1e-15);
        }

        // x = 0.5 is the half node of cell 4 when dx = 1/9.
        let g = Grid::new(1.0, 8, 1.0, 10).unwrap();
        let m = DiffusionModel::power_profile(0.6, Profile::Affine { b: 5.0, c: 1.5 });
        let k = coefficient_at_half_nodes(&m, &g).unwrap();
        assert!((g.x_half(4) - 0.5).abs() < 1e-15);
        assert!((k[4] - 2.6390).abs() < 1e-4, "{}", k[4]);
    }

    #[test]
    fn nonpositive_coefficient_is_rejected() {
        let g = Grid::new(1.0, 10, 1.0, 10).unwrap();
        let m = DiffusionModel::power_profile(0.5, Profile::Affine { b: -3.0, c: 1.0 });
        assert!(matches!(
            coefficient_at_half_nodes(&m, &g),
            Err(Error::NonPositiveCoefficient { .. })
        ));
        let tab = DiffusionModel::power_profile(0.5, Profile::Tabulated(vec![1.0; 3]));
        assert!(coefficient_at_half_nodes(&tab, &g).is_err());
    }

    #[test]
    fn kind_alpha_compatibility() {
        assert!(DegeneracyKind::Weak.check_alpha(0.5).is_ok());
        assert!(DegeneracyKind::Weak.check_alpha(1.0).is_err());
        assert!(DegeneracyKind::Strong.check_alpha(1.0).is_ok());
        assert!(DegeneracyKind::Strong.check_alpha(2.0).is_err());
        assert!(DegeneracyKind::NonDegenerate.check_alpha(0.0).is_ok());
        assert!(DegeneracyKind::NonDegenerate.check_alpha(0.3).is_err());
    }

    fn eigenmode_error(nx: usize, nt: usize, scheme: TimeScheme) -> f64 {
        let g = Grid::new(1.0, nx, 0.1, nt).unwrap();
        let u0 = g.sample(|x| (PI * x).sin());
        let opts = SolverOptions {
            scheme,
            ..Default::default()
        };
        let traj = solve_parabolic_with(
            &DiffusionModel::constant(1.0, 0.0),
            DegeneracyKind::NonDegenerate,
            &g,
            &u0,
            &Source::Zero,
            &opts,
        )
        .unwrap();
        let exact = g.sample(|x| (-PI * PI * 0.1_f64).exp() * (PI * x).sin());
        let err = l2_norm_sq(&traj.last().sub(&exact).unwrap()).unwrap().sqrt();
        err / l2_norm_sq(&exact).unwrap().sqrt()
    }

    #[test]
    fn heat_eigenmode_oracle() {
        for scheme in [
            TimeScheme::ImplicitEuler,
            TimeScheme::CrankNicolson,
            TimeScheme::TrBdf2,
            TimeScheme::Sdirk3,
        ] {
            let e = eigenmode_error(200, 4000, scheme);
            assert!(e <= 1e-2, "{scheme:?}: {e}");
        }
    }

    #[test]
    fn eigenmode_convergence_factor() {
        for scheme in [
            TimeScheme::ImplicitEuler,
            TimeScheme::CrankNicolson,
            TimeScheme::TrBdf2,
            TimeScheme::Sdirk3,
        ] {
            let coarse = eigenmode_error(49, 100, scheme);
            let fine = eigenmode_error(99, 400, scheme);
            assert!(coarse / fine >= 3.0, "{scheme:?}: {}", coarse / fine);
        }
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let g = Grid::new(1.0, 20, 1.0, 20).unwrap();
        let t = solve_parabolic(
            &DiffusionModel::power(1.3),
            DegeneracyKind::Strong,
            &g,
            &Field::zeros(g),
            &Source::Zero,
        )
        .unwrap();
        assert!((0..t.n_levels()).all(|n| t.level(n).iter().all(|&v| v == 0.0)));
        assert!(dissipativity_check(&t).contractive);
    }

    #[test]
    fn injected_growth_is_detected() {
        let g = Grid::new(1.0, 20, 0.1, 20).unwrap();
        let u0 = g.sample(|x| (PI * x).sin());
        let mut t = solve_parabolic(
            &DiffusionModel::constant(1.0, 0.0),
            DegeneracyKind::NonDegenerate,
            &g,
            &u0,
            &Source::Zero,
        )
        .unwrap();
        assert!(dissipativity_check(&t).contractive);
        let m = g.n_nodes();
        t.values_mut()[10 * m..11 * m].iter_mut().for_each(|v| *v *= 1.5);
        let d = dissipativity_check(&t);
        assert!(!d.contractive);
        assert!(d.max_violation > 0.0);
    }

    #[test]
    fn truncated_run_matches_full_run_prefix() {
        let g = Grid::new(1.0, 30, 1.0, 40).unwrap();
        let u0 = g.sample(|x| x * x * (1.0 - x));
        let m = DiffusionModel::constant(1.7, 1.0);
        let full = solve_parabolic(&m, DegeneracyKind::Strong, &g, &u0, &Source::Zero).unwrap();
        let opts = SolverOptions {
            last_level: Some(10),
            ..Default::default()
        };
        let part = solve_parabolic_with(&m, DegeneracyKind::Strong, &g, &u0, &Source::Zero, &opts).unwrap();
        assert_eq!(part.n_levels(), 11);
        assert_eq!(part.level(10), full.level(10));
    }

    #[test]
    fn non_finite_source_is_an_error() {
        let g = Grid::new(1.0, 10, 1.0, 10).unwrap();
        let src = Source::function(|x, _| 1.0 / (x - x));
        let r = solve_parabolic(
            &DiffusionModel::power(0.5),
            DegeneracyKind::Weak,
            &g,
            &Field::zeros(g),
            &src,
        );
        assert!(r.is_err());
    }
}
