//! Compiled-in setups of the reference experiments.
//!
//! Tests 1–4 recover a constant `a` (with `α = 1`) from an interior
//! snapshot, Tests 5–7 the same from the boundary flux. Tests 8–12 recover
//! the power `α` with `a ≡ 1`, Tests 13–14 an affine or quadratic profile
//! with `α = 0.6` fixed.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inversion::{Bounds, Family, InverseProblemSpec};
use crate::observations::{synthesize, synthesize_on, ForwardSetup, ObservationKind, WeightKind};
use crate::parabolic::{DegeneracyKind, Profile, Source};

/// `ℓ` values of the sweeps for Tests 8 and 9.
pub const ELL_SWEEP: [f64; 6] = [0.9, 0.99, 1.0, 1.01, 1.1, 1.2];

pub const PRESET_NAMES: [&str; 14] = [
    "test1", "test2", "test3", "test4", "test5", "test6", "test7", "test8", "test9", "test10", "test11", "test12",
    "test13", "test14",
];

fn cubic(x: f64) -> f64 {
    0.5 * x * x * (1.0 - x)
}

fn quartic(x: f64) -> f64 {
    0.3 * x * x * (1.0 - x) * (1.0 - x)
}

fn zero(_: f64) -> f64 {
    0.0
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub family: Family,
    pub truth: Vec<f64>,
    pub initial: Vec<f64>,
    pub bounds: Vec<Bounds>,
    pub ell: f64,
    pub t_final: f64,
    pub nx: usize,
    pub nt: usize,
    pub kind: DegeneracyKind,
    pub u0: fn(f64) -> f64,
    pub u0_formula: &'static str,
    pub source: Source,
    pub source_formula: &'static str,
    pub observation: ObservationKind,
}

fn a_box() -> Bounds {
    Bounds { lo: 0.1, hi: 3.0 }
}

fn weak_box() -> Bounds {
    Bounds { lo: 0.05, hi: 0.95 }
}

fn strong_box() -> Bounds {
    Bounds { lo: 1.0, hi: 1.95 }
}

fn profile_box(hi: f64) -> Bounds {
    Bounds { lo: 0.1, hi }
}

impl Preset {
    /// Setup by preset name (`test1` … `test14`, or `custom`).
    ///
    /// `custom` starts from a zero initial state with constant `a`; it is the
    /// blank template the CLI overrides field by field.
    pub fn by_name(name: &str) -> Result<Self> {
        let interior = |t0, weight| ObservationKind::InteriorAtT0 { t0, weight };
        let linear_case = |n: &str, truth: f64, initial: f64, obs| Preset {
            name: n.to_string(),
            family: Family::ConstantA { alpha: 1.0 },
            truth: vec![truth],
            initial: vec![initial],
            bounds: vec![a_box()],
            ell: 1.0,
            t_final: 5.0,
            nx: 200,
            nt: 2000,
            kind: DegeneracyKind::Strong,
            u0: cubic,
            u0_formula: "0.5x^2(1-x)",
            source: Source::Zero,
            source_formula: "0",
            observation: obs,
        };
        let power_case = |n: &str, truth: f64, initial: f64, ell: f64, obs| {
            let (kind, bounds) = if truth < 1.0 {
                (DegeneracyKind::Weak, weak_box())
            } else {
                (DegeneracyKind::Strong, strong_box())
            };
            Preset {
                name: n.to_string(),
                family: Family::Alpha {
                    profile: Profile::Constant(1.0),
                },
                truth: vec![truth],
                initial: vec![initial],
                bounds: vec![bounds],
                ell,
                t_final: 10.0,
                nx: 200,
                nt: 4000,
                kind,
                u0: quartic,
                u0_formula: "0.3x^2(1-x)^2",
                source: Source::Zero,
                source_formula: "0",
                observation: obs,
            }
        };
        let profile_case = |n: &str, family, truth: Vec<f64>, initial: Vec<f64>| {
            let bounds = vec![profile_box(10.0), profile_box(10.0), profile_box(5.0)][..truth.len()].to_vec();
            Preset {
                name: n.to_string(),
                family,
                truth,
                initial,
                bounds,
                ell: 1.0,
                t_final: 5.0,
                nx: 200,
                nt: 2000,
                kind: DegeneracyKind::Weak,
                u0: quartic,
                u0_formula: "0.3x^2(1-x)^2",
                source: Source::Zero,
                source_formula: "0",
                observation: ObservationKind::BoundaryFlux,
            }
        };
        let snap = interior(0.2, WeightKind::Linear);
        let power_snap = interior(0.2, WeightKind::Square);
        let flux = ObservationKind::BoundaryFlux;
        Ok(match name {
            "test1" => linear_case(name, 1.7, 0.7, snap),
            "test2" => linear_case(name, 1.0, 0.2, snap),
            "test3" => linear_case(name, 0.2, 0.7, snap),
            "test4" => Preset {
                source: Source::function(|x, t| 2.0 * x * t),
                source_formula: "2xt",
                ..linear_case(name, 1.7, 0.7, interior(0.4, WeightKind::Linear))
            },
            "test5" => linear_case(name, 1.7, 0.7, flux),
            "test6" => linear_case(name, 1.0, 0.2, flux),
            "test7" => linear_case(name, 0.2, 0.7, flux),
            "test8" => power_case(name, 0.4, 0.8, 0.9, power_snap),
            "test9" => power_case(name, 1.3, 1.6, 0.9, power_snap),
            "test10" => power_case(name, 0.6, 0.2, 1.0, flux),
            "test11" => power_case(name, 1.3, 1.6, 0.99, flux),
            "test12" => power_case(name, 1.3, 1.6, 1.0, flux),
            "test13" => profile_case(name, Family::Affine { alpha: 0.6 }, vec![5.0, 1.5], vec![1.0, 1.0]),
            "test14" => profile_case(
                name,
                Family::Quadratic { alpha: 0.6 },
                vec![4.0, 3.0, 1.0],
                vec![3.5, 2.5, 0.5],
            ),
            "custom" => Preset {
                u0: zero,
                u0_formula: "0",
                ..linear_case(name, 1.0, 0.5, snap)
            },
            _ => return Err(Error::OutOfRange(format!("unknown preset '{name}'"))),
        })
    }

    pub fn all() -> Vec<Preset> {
        PRESET_NAMES
            .iter()
            .map(|n| Preset::by_name(n).expect("compiled preset"))
            .collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.ell, self.nx, self.t_final, self.nt)
    }

    pub fn setup(&self) -> ForwardSetup {
        ForwardSetup {
            kind: self.kind,
            u0: self.u0,
            source: self.source.clone(),
        }
    }

    /// Override the snapshot time; no effect on boundary-flux presets.
    pub fn set_t0(&mut self, t0: f64) {
        if let ObservationKind::InteriorAtT0 { weight, .. } = self.observation {
            self.observation = ObservationKind::InteriorAtT0 { t0, weight };
        }
    }

    pub fn t0(&self) -> Option<f64> {
        match self.observation {
            ObservationKind::InteriorAtT0 { t0, .. } => Some(t0),
            ObservationKind::BoundaryFlux => None,
        }
    }

    /// Synthesize the noiseless target on the refined data grid and assemble
    /// the inverse problem.
    pub fn build(&self) -> Result<InverseProblemSpec> {
        self.assemble(false)
    }

    /// Like [`Preset::build`] but with the target computed on the inversion
    /// grid itself, so the discrete truth is an exact minimizer.
    pub fn build_inverse_crime(&self) -> Result<InverseProblemSpec> {
        self.assemble(true)
    }

    fn assemble(&self, crime: bool) -> Result<InverseProblemSpec> {
        let grid = self.grid()?;
        let setup = self.setup();
        let truth = self.family.model(&self.truth)?;
        let obs = if crime {
            synthesize_on(&truth, &setup, &grid, &grid, self.observation, true)?
        } else {
            synthesize(&truth, &setup, &grid, self.observation)?
        };
        InverseProblemSpec::new(
            self.family.clone(),
            self.bounds.clone(),
            self.initial.clone(),
            setup,
            grid,
            obs,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_consistent() {
        for p in Preset::all() {
            assert_eq!(p.truth.len(), p.family.dim(), "{}", p.name);
            for ((t, i), b) in p.truth.iter().zip(&p.initial).zip(&p.bounds) {
                assert!(b.strictly_contains(*t) && b.strictly_contains(*i), "{}", p.name);
            }
            if let Family::Alpha { .. } = p.family {
                p.kind.check_alpha(p.truth[0]).unwrap();
                p.kind.check_alpha(p.bounds[0].lo).unwrap();
                p.kind.check_alpha(p.bounds[0].hi).unwrap();
            }
            p.grid().unwrap();
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(Preset::by_name("test15").is_err());
        assert!(Preset::by_name("custom").is_ok());
    }

    #[test]
    fn t0_override_only_touches_snapshots() {
        let mut p = Preset::by_name("test1").unwrap();
        p.set_t0(0.5);
        assert_eq!(p.t0(), Some(0.5));
        let mut q = Preset::by_name("test5").unwrap();
        q.set_t0(0.5);
        assert_eq!(q.t0(), None);
    }
}
