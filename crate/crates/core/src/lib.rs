//! Pseudo-spectral simulator for the two-dimensional simplified Ericksen–Leslie
//! system on the flat torus, with runtime energy and constraint diagnostics.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the double-precision types used by the command-line driver.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod estimates;
pub mod field;
pub mod forcing;
pub mod grid;
pub mod integrator;
pub mod local;
pub mod monitor;
pub mod ops;
pub mod picard;
pub mod potential;
pub mod rhs;
pub mod scalar;
pub mod scenario;
pub mod snapshot;
pub mod state;

pub use error::{Error, Result};
pub use field::{Field, ScalarField, Spectrum, VectorField2, VectorField3};
pub use forcing::ForcingSpec;
pub use grid::TorusGrid;
pub use integrator::StepperConfig;
pub use potential::PotentialSpec;
pub use scalar::Real;
pub use state::State;

pub type Grid64 = TorusGrid<f64>;
pub type State64 = State<f64>;
pub type Scalar64 = ScalarField<f64>;
pub type Vector2F64 = VectorField2<f64>;
pub type Vector3F64 = VectorField3<f64>;
pub type Potential64 = PotentialSpec<f64>;
