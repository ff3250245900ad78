use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("principal value undefined at {point}: field is not C^2 there")]
    PvUndefined { point: String },

    #[error("projection onto the boundary is not unique at {point}")]
    AmbiguousProjection { point: String },

    #[error("point {point} is not on the boundary (distance {distance:e})")]
    NotOnBoundary { point: String, distance: f64 },

    #[error("empty index set: {0}")]
    EmptyIndexSet(&'static str),

    #[error("non-integrable combination: refinement diverged ({diagnostic})")]
    NonIntegrable { diagnostic: String },

    #[error("certification failed at {point}: operator value {value:e}, required {required:e}")]
    CertificationFailed {
        point: String,
        value: f64,
        required: f64,
    },

    #[error("negative off-diagonal weight {weight:e} in row {row} ({context})")]
    NegativeWeight {
        row: usize,
        weight: f64,
        context: String,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("policy iteration cycled beyond the budget of {iterations} iterations")]
    PolicyCycling {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("extrapolation diverged: {0}")]
    DivergentExtrapolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
