//! Whole-plane two-dimensional Navier-Stokes vorticity with measure-valued
//! initial data.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instances used by the runner.

pub mod biot_savart;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod hermite;
pub mod io;
pub mod measure;
pub mod oseen;
pub mod propagators;
pub mod scalar;
pub mod selfsim;
pub mod solver;
mod spectral;

pub use error::{Error, Result};
pub use field::{Grid, ScalarField, VectorField};
pub use oseen::OseenVortex;
pub use scalar::{Point, Real};

pub type Grid64 = Grid<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type FiniteMeasure64 = measure::FiniteMeasure<f64>;
pub type OseenVortex64 = OseenVortex<f64>;
pub type SolverRun64 = solver::SolverRun<f64>;
pub type Trajectory64 = propagators::Trajectory<f64>;

pub type Grid32 = Grid<f32>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField32 = VectorField<f32>;
pub type FiniteMeasure32 = measure::FiniteMeasure<f32>;
pub type OseenVortex32 = OseenVortex<f32>;
