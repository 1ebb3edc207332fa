//! Projected BFGS for small box-constrained problems.
//!
//! The inverse Hessian approximation acts on the free variables only; a
//! variable is held fixed for an iteration when it sits on a bound and the
//! gradient pushes it outward. Trial points are projected onto the box and
//! accepted by an Armijo test on the projected step.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::OutOfRange(format!("invalid box [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn strictly_contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Central differences with `h_k = max(1e−6, 1e−6 |p_k|)`; one-sided where
/// a central stencil would leave the box. The `2·dim` evaluations run in
/// parallel and are reduced in a fixed order.
pub fn gradient_fd<F>(f: &F, params: &[f64], bounds: &[Bounds]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if params.len() != bounds.len() {
        return Err(Error::Incompatible("parameter and bound counts differ".into()));
    }
    enum Stencil {
        Central(usize, usize),
        Forward(usize),
        Backward(usize),
    }
    let mut points: Vec<Vec<f64>> = vec![params.to_vec()];
    let mut stencils = Vec::with_capacity(params.len());
    let mut steps = Vec::with_capacity(params.len());
    for (k, (&p, b)) in params.iter().zip(bounds).enumerate() {
        let h = FD_STEP.max(FD_STEP * p.abs());
        steps.push(h);
        let mut plus = params.to_vec();
        plus[k] = p + h;
        let mut minus = params.to_vec();
        minus[k] = p - h;
        let (up, down) = (b.contains(p + h), b.contains(p - h));
        let stencil = match (up, down) {
            (true, true) => {
                points.push(plus);
                points.push(minus);
                Stencil::Central(points.len() - 2, points.len() - 1)
            }
            (true, false) => {
                points.push(plus);
                Stencil::Forward(points.len() - 1)
            }
            (false, true) => {
                points.push(minus);
                Stencil::Backward(points.len() - 1)
            }
            (false, false) => {
                return Err(Error::OutOfRange(format!(
                    "box for parameter {k} is narrower than the FD step"
                )));
            }
        };
        stencils.push(stencil);
    }
    let needs_center = stencils.iter().any(|s| !matches!(s, Stencil::Central(..)));
    let values: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| if i == 0 && !needs_center { Ok(f64::NAN) } else { f(p) })
        .collect::<Result<_>>()?;
    Ok(stencils
        .iter()
        .zip(steps)
        .map(|(s, h)| match *s {
            Stencil::Central(a, b) => (values[a] - values[b]) / (2.0 * h),
            Stencil::Forward(a) => (values[a] - values[0]) / h,
            Stencil::Backward(b) => (values[0] - values[b]) / h,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    pub cost_tolerance: f64,
    pub gradient_tolerance: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Length of the very first step as a fraction of the box width.
    pub first_step_fraction: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            cost_tolerance: 1e-22,
            gradient_tolerance: 1e-12,
            armijo: 1e-4,
            max_backtracks: 40,
            first_step_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    CostTolerance,
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub params: Vec<f64>,
    pub cost: f64,
    /// Cost at the initial guess followed by the cost after each accepted step.
    pub cost_history: Vec<f64>,
    pub param_history: Vec<Vec<f64>>,
    pub iterations: usize,
    pub termination: Termination,
    pub projected_gradient_norm: f64,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

fn projected_gradient(x: &[f64], g: &[f64], bounds: &[Bounds]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), b)| xi - b.clamp(xi - gi))
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` over the box with gradient `grad`.
pub fn minimize_box<F, G>(f: &F, grad: &G, x0: &[f64], bounds: &[Bounds], opts: &BfgsOptions) -> Result<InversionResult>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let start = Instant::now();
    let n = x0.len();
    if bounds.len() != n {
        return Err(Error::Incompatible("parameter and bound counts differ".into()));
    }
    let mut x: Vec<f64> = x0.iter().zip(bounds).map(|(&v, b)| b.clamp(v)).collect();
    let mut fx = f(&x)?;
    let mut g = grad(&x)?;
    // Row-major inverse Hessian approximation.
    let identity = |n: usize| {
        let mut h = vec![0.0; n * n];
        (0..n).for_each(|i| h[i * n + i] = 1.0);
        h
    };
    let mut hinv = identity(n);
    let mut scaled = false;

    let mut cost_history = vec![fx];
    let mut param_history = vec![x.clone()];
    let mut iterations = 0;
    let termination = loop {
        if fx <= opts.cost_tolerance {
            break Termination::CostTolerance;
        }
        if inf_norm(&projected_gradient(&x, &g, bounds)) <= opts.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }

        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= bounds[i].lo && g[i] > 0.0) || (x[i] >= bounds[i].hi && g[i] < 0.0)))
            .collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                -(0..n).filter(|&j| free[j]).map(|j| hinv[i * n + j] * g[j]).sum::<f64>()
            })
            .collect();
        if dot(&d, &g) >= 0.0 {
            hinv = identity(n);
            scaled = false;
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        if !scaled {
            // Unscaled gradient steps carry no length information.
            let ratio = (0..n)
                .filter(|&i| d[i] != 0.0)
                .map(|i| d[i].abs() / bounds[i].width())
                .fold(0.0_f64, f64::max);
            if ratio > 0.0 {
                let s = opts.first_step_fraction / ratio;
                d.iter_mut().for_each(|v| *v *= s);
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = (0..n).map(|i| bounds[i].clamp(x[i] + t * d[i])).collect();
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if s.iter().all(|&v| v == 0.0) {
                break;
            }
            let ft = f(&trial)?;
            if ft <= fx && ft <= fx + opts.armijo * dot(&g, &s) {
                accepted = Some((trial, s, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, s, ft)) = accepted else {
            break Termination::LineSearchFailed;
        };
        let gt = grad(&trial)?;
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * (dot(&s, &s) * yy).sqrt() && sy > 0.0 {
            if !scaled {
                hinv = identity(n);
                hinv.iter_mut().for_each(|v| *v *= sy / yy);
                scaled = true;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = trial;
        fx = ft;
        g = gt;
        iterations += 1;
        cost_history.push(fx);
        param_history.push(x.clone());
    };

    Ok(InversionResult {
        projected_gradient_norm: inf_norm(&projected_gradient(&x, &g, bounds)),
        params: x,
        cost: fx,
        cost_history,
        param_history,
        iterations,
        termination,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize, lo: f64, hi: f64) -> Vec<Bounds> {
        vec![Bounds::new(lo, hi).unwrap(); n]
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let f = |p: &[f64]| Ok((p[0] - 2.0).powi(2));
        for p in [0.5, 1.7, 3.3] {
            let g = gradient_fd(&f, &[p], &unit_box(1, -10.0, 10.0)).unwrap();
            assert!((g[0] - 2.0 * (p - 2.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn fd_gradient_goes_one_sided_at_the_box() {
        let f = |p: &[f64]| Ok((p[0] - 2.0).powi(2));
        let b = unit_box(1, 0.0, 1.0);
        let g = gradient_fd(&f, &[1.0], &b).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-5);
        let g = gradient_fd(&f, &[0.0], &b).unwrap();
        assert!((g[0] + 4.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_in_a_box() {
        let f = |p: &[f64]| Ok((1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2));
        let b = unit_box(2, -2.0, 2.0);
        let grad = |p: &[f64]| gradient_fd(&f, p, &b);
        let r = minimize_box(&f, &grad, &[-1.2, 1.0], &b, &BfgsOptions::default()).unwrap();
        assert!(
            (r.params[0] - 1.0).abs() < 1e-5 && (r.params[1] - 1.0).abs() < 1e-5,
            "{r:?}"
        );
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn active_bound_is_respected() {
        // Unconstrained minimum at (3, -1) lies outside the box.
        let f = |p: &[f64]| Ok(10.0 + (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2) + 0.5 * p[0] * p[1]);
        let b = vec![Bounds::new(0.0, 2.0).unwrap(), Bounds::new(-5.0, 5.0).unwrap()];
        let grad = |p: &[f64]| gradient_fd(&f, p, &b);
        let r = minimize_box(&f, &grad, &[1.0, 1.0], &b, &BfgsOptions::default()).unwrap();
        assert!((r.params[0] - 2.0).abs() < 1e-9);
        // ∂/∂p1 = 4(p1 + 1) + 0.5 p0 = 0 at p0 = 2
        assert!((r.params[1] + 1.25).abs() < 1e-6, "{r:?}");
        for p in &r.param_history {
            assert!(p.iter().zip(&b).all(|(v, bb)| bb.contains(*v)));
        }
    }

    #[test]
    fn zero_cost_terminates_immediately() {
        let f = |_: &[f64]| Ok(0.0);
        let b = unit_box(1, 0.0, 1.0);
        let grad = |p: &[f64]| gradient_fd(&f, p, &b);
        let r = minimize_box(&f, &grad, &[0.5], &b, &BfgsOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.termination, Termination::CostTolerance);
        assert_eq!(r.params, vec![0.5]);
    }
}
