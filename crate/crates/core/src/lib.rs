//! Forward and inverse solvers for degenerate diffusion `∂t u − ∂x(x^α a(x) ∂x u) = f`.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod inversion;
pub mod observations;
pub mod parabolic;
pub mod presets;
pub mod tridiag;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use inversion::{minimize, Family, InverseProblemSpec, InversionResult};
pub use observations::{Observation, ObservationKind, WeightKind};
pub use parabolic::{DegeneracyKind, DiffusionModel, Profile, Source, Trajectory};
