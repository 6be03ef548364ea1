use thiserror::Error;

use crate::types::Branch;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value supplied for `{0}`")]
    NonFinite(&'static str),

    #[error("point (x = {x}, t = {t}) lies outside the {branch} region")]
    RegionMismatch { branch: Branch, x: f64, t: f64 },

    #[error("grid comes within {guard} of the measurement point at x = {mp}")]
    StraddlesMeasurementPoint { mp: f64, guard: f64 },

    #[error("total probability diverges: envelope rate R = 0 is the plane-wave regime")]
    DivergentNormalization,

    #[error("density matrix trace is {0}, expected 1")]
    TraceNotUnity(f64),

    #[error("state is not normalized: {0}")]
    NotNormalized(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("only {found} eigenvalue(s) resolved below the discretization ceiling ({requested} requested)")]
    InsufficientEigenvalues { found: usize, requested: usize },

    #[error("(x = {x}, t = {t}) is not a measurement point (offset {offset:e})")]
    NotAtMeasurementPoint { x: f64, t: f64, offset: f64 },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("states {i} and {j} are not orthogonal (overlap {overlap:e})")]
    NonOrthogonal { i: usize, j: usize, overlap: f64 },

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("contour has zero length")]
    DegenerateContour,

    #[error("wave function magnitude {0:e} too small to divide by")]
    VanishingWavefunction(f64),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("distribution function is not monotone decreasing near x = {0}")]
    NonMonotone(f64),

    #[error("density matrix is not a valid state: {0}")]
    InvalidDensity(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
