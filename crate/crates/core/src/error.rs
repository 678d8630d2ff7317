use thiserror::Error;

use crate::params::ModelKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive and finite (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("traveling band requires d = 2*beta/mu > 1 (got d = {d})")]
    ConstraintViolation { d: f64 },

    #[error("crowd term is degenerate (gamma0 = 1/tau, alpha = 0); use the crowd-free model directly")]
    DegenerateCrowd,

    #[error("operation not supported for model kind {0}")]
    Unsupported(ModelKind),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too coarse: {nodes:.2} nodes span the band width, need at least 8")]
    GridTooCoarse { nodes: f64 },

    #[error("time step {dt} exceeds the diffusion stability bound {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite field value at t = {t} h")]
    StabilityViolation { t: f64 },

    #[error("negative organism density {min} at t = {t} h")]
    NegativityBreach { t: f64, min: f64 },

    #[error("snapshot {index} never crosses the requested level")]
    NoCrossing { index: usize },

    #[error("jump kernel unresolved: sigma = {sigma} < 3*dx = {limit}")]
    ResolutionError { sigma: f64, limit: f64 },

    #[error("trajectories do not share a grid or report times")]
    GridMismatch,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures raised by a numerical integrator rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StabilityViolation { .. } | Error::NegativityBreach { .. } | Error::NoCrossing { .. }
        )
    }
}
