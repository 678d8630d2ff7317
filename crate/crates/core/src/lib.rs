//! Chemotactic traveling bands: closed-form profiles, a finite-difference
//! solver, a direct jump-kernel integrator, and checks tying them together.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod io;
pub mod kernel;
pub mod params;
pub mod pde;
pub mod verify;

pub use error::{Error, Result};
pub use params::{crowd_neutral, derive_params, ModelKind, ModelParams, RawParams};
