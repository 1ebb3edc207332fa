//! Uniform space/time meshes, nodal fields and the quadrature rules used by
//! every cost functional and diagnostic.
//!
//! Nodes are `x_i = i * dx` for `i = 0..=nx+1`, with `dx = ell / (nx + 1)`.
//! The degenerate endpoint `x = 0` is node 0; coefficients are only ever
//! evaluated at the half nodes `x_{i+1/2} = (i + 1/2) dx`, which are all
//! strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarsest admissible mesh in both directions.
pub const MIN_STEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    ell: f64,
    nx: usize,
    t_final: f64,
    nt: usize,
}

impl Grid {
    pub fn new(ell: f64, nx: usize, t_final: f64, nt: usize) -> Result<Self> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length must be positive, got {ell}")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if nx < MIN_STEPS || nt < MIN_STEPS {
            return Err(Error::InvalidGrid(format!(
                "need nx >= {MIN_STEPS} and nt >= {MIN_STEPS}, got nx = {nx}, nt = {nt}"
            )));
        }
        Ok(Self { ell, nx, t_final, nt })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// Interior node count.
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Total node count including both endpoints.
    pub fn n_nodes(&self) -> usize {
        self.nx + 2
    }

    pub fn dx(&self) -> f64 {
        self.ell / (self.nx + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Node coordinate; the last node is exactly `ell`.
    pub fn x(&self, i: usize) -> f64 {
        self.ell * i as f64 / (self.nx + 1) as f64
    }

    /// Coordinate of the half node between `i` and `i + 1`.
    pub fn x_half(&self, i: usize) -> f64 {
        self.ell * (i as f64 + 0.5) / (self.nx + 1) as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t_final * n as f64 / self.nt as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    pub fn half_nodes(&self) -> Vec<f64> {
        (0..=self.nx).map(|i| self.x_half(i)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| self.t(n)).collect()
    }

    /// Time level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        let n = (t / self.dt()).round();
        n.clamp(0.0, self.nt as f64) as usize
    }

    /// Mesh whose nodes contain every node of `self`: the interval count is
    /// multiplied by `space` and the step count by `time`.
    pub fn refined(&self, space: usize, time: usize) -> Result<Self> {
        if space == 0 || time == 0 {
            return Err(Error::InvalidGrid("refinement factors must be positive".into()));
        }
        Self::new(self.ell, space * (self.nx + 1) - 1, self.t_final, time * self.nt)
    }

    /// Same spatial mesh and time step, truncated after `levels` steps.
    pub fn truncated(&self, levels: usize) -> Result<Self> {
        if levels > self.nt {
            return Err(Error::InvalidGrid(format!(
                "cannot truncate {} steps to {levels}",
                self.nt
            )));
        }
        Self::new(self.ell, self.nx, self.t(levels), levels)
    }

    /// Same spatial mesh with a different time axis.
    pub fn with_time(&self, t_final: f64, nt: usize) -> Result<Self> {
        Self::new(self.ell, self.nx, t_final, nt)
    }

    /// Sample `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: *self,
            values: self.nodes().into_iter().map(f).collect(),
        }
    }
}

/// Nodal values at a single time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Incompatible(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Pointwise `self - other`; both fields must live on the same grid.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::Incompatible("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    /// Linear interpolation at an arbitrary point of `[0, ell]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        interp_uniform(&self.values, self.grid.dx(), x)
    }

    /// Restrict (or prolong) onto another mesh of the same domain by linear
    /// interpolation.
    pub fn resample(&self, target: &Grid) -> Result<Field> {
        if (target.ell() - self.grid.ell()).abs() > 1e-12 * self.grid.ell() {
            return Err(Error::Incompatible("resampling across different domains".into()));
        }
        Ok(Field {
            grid: *target,
            values: target.nodes().into_iter().map(|x| self.interpolate(x)).collect(),
        })
    }
}

/// Linear interpolation of uniformly spaced samples starting at 0.
pub(crate) fn interp_uniform(values: &[f64], h: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let s = (x / h).clamp(0.0, last as f64);
    let i = (s.floor() as usize).min(last.saturating_sub(1));
    let w = s - i as f64;
    if w == 0.0 {
        return values[i];
    }
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Composite trapezoid rule for uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Trapezoid approximation of `∫_0^ℓ |u|² dx`.
pub fn l2_norm_sq(u: &Field) -> Result<f64> {
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("l2_norm_sq input"));
    }
    let sq: Vec<f64> = u.values.iter().map(|v| v * v).collect();
    Ok(trapezoid(&sq, u.grid.dx()))
}

/// Midpoint approximation of `∫_0^ℓ x^α |∂x u|² dx` using the difference
/// quotient of `u` on each cell, weighted at the cell midpoint.
pub fn weighted_h1_seminorm_sq(u: &Field, alpha: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!(
            "weight power must lie in [0, 2), got {alpha}"
        )));
    }
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weighted_h1_seminorm_sq input"));
    }
    let g = &u.grid;
    let dx = g.dx();
    let sum: f64 = u
        .values
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let slope = (w[1] - w[0]) / dx;
            g.x_half(i).powf(alpha) * slope * slope
        })
        .sum();
    Ok(sum * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(nx: usize) -> Grid {
        Grid::new(1.0, nx, 1.0, 10).unwrap()
    }

    #[test]
    fn rejects_coarse_or_degenerate_meshes() {
        assert!(Grid::new(1.0, 7, 1.0, 10).is_err());
        assert!(Grid::new(1.0, 10, 1.0, 7).is_err());
        assert!(Grid::new(0.0, 10, 1.0, 10).is_err());
        assert!(Grid::new(1.0, 10, -1.0, 10).is_err());
    }

    #[test]
    fn endpoints_are_exact() {
        for ell in [0.9, 0.99, 1.0, 1.01, 1.1, 1.2, 0.3] {
            let g = Grid::new(ell, 199, 5.0, 2000).unwrap();
            assert_eq!(g.x(0), 0.0);
            assert_eq!(g.x(g.nx() + 1), ell);
            assert_eq!(g.t(g.nt()), 5.0);
        }
    }

    #[test]
    fn refined_grid_contains_coarse_nodes() {
        let g = Grid::new(1.1, 200, 5.0, 2000).unwrap();
        let f = g.refined(2, 4).unwrap();
        assert_eq!(f.nx(), 401);
        assert_eq!(f.nt(), 8000);
        for i in 0..g.n_nodes() {
            assert!((f.x(2 * i) - g.x(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn l2_examples() {
        let g = unit(199);
        assert_eq!(l2_norm_sq(&Field::zeros(g)).unwrap(), 0.0);
        assert!((l2_norm_sq(&g.sample(|_| 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((l2_norm_sq(&g.sample(|x| x)).unwrap() - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn quadrature_of_one_returns_length() {
        for ell in [0.5, 1.0, 2.5] {
            let g = Grid::new(ell, 37, 1.0, 10).unwrap();
            let v = l2_norm_sq(&g.sample(|_| 1.0)).unwrap();
            assert!((v - ell).abs() <= 1e-12 * ell);
        }
    }

    #[test]
    fn l2_error_is_second_order() {
        let exact = 1.0 / 5.0;
        let err = |nx: usize| (l2_norm_sq(&unit(nx).sample(|x| x * x)).unwrap() - exact).abs();
        // nx + 1 intervals: 20 -> 40
        let ratio = err(19) / err(39);
        assert!(ratio >= 3.5, "ratio {ratio}");
    }

    #[test]
    fn seminorm_examples() {
        let g = unit(199);
        assert_eq!(weighted_h1_seminorm_sq(&g.sample(|_| 3.0), 1.0).unwrap(), 0.0);
        let lin = weighted_h1_seminorm_sq(&g.sample(|x| x), 1.0).unwrap();
        assert!((lin - 0.5).abs() < 1e-6);
        let s = weighted_h1_seminorm_sq(&g.sample(|x| (PI * x).sin()), 0.0).unwrap();
        assert!((s - PI * PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn seminorm_rejects_bad_power() {
        let g = unit(10);
        assert!(weighted_h1_seminorm_sq(&Field::zeros(g), 2.0).is_err());
        assert!(weighted_h1_seminorm_sq(&Field::zeros(g), -0.1).is_err());
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let g = unit(10);
        let mut v = vec![0.0; g.n_nodes()];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn resample_is_injection_on_shared_nodes() {
        let g = Grid::new(1.0, 20, 1.0, 10).unwrap();
        let fine = g.refined(2, 1).unwrap();
        let u = fine.sample(|x| (3.0 * x).sin());
        let r = u.resample(&g).unwrap();
        for (i, v) in r.values().iter().enumerate() {
            assert!((v - (3.0 * g.x(i)).sin()).abs() < 1e-14);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn seminorm_ignores_constant_shift(
                vals in proptest::collection::vec(-1.0f64..1.0, 22),
                shift in -10.0f64..10.0,
                alpha in 0.0f64..1.99,
            ) {
                let g = Grid::new(1.0, 20, 1.0, 10).unwrap();
                let u = Field::new(g, vals).unwrap();
                let a = weighted_h1_seminorm_sq(&u, alpha).unwrap();
                let b = weighted_h1_seminorm_sq(&u.map(|v| v + shift), alpha).unwrap();
                let scale = 1.0 + a.abs() + shift.abs() * shift.abs();
                prop_assert!((a - b).abs() <= 1e-11 * scale);
            }
        }
    }
}
