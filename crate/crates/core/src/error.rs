use thiserror::Error;

/// Errors raised while building or checking star-graph solutions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge count n = {0} is below the minimum of 3")]
    EdgeCountTooSmall(usize),

    #[error("coupling c must be finite, got {0}")]
    NonFiniteCoupling(f64),

    #[error("coupling c = 0 leaves the diagonal-supported symmetric family undefined")]
    ZeroCoupling,

    #[error("coupling c = {0} is not attractive; the complex-momentum profile needs c < 0")]
    NotAttractive(f64),

    #[error("edge index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid quadrant point: {0}")]
    InvalidPoint(String),

    #[error("momentum pair violates k1^2 + k2^2 = 1 (defect {0:e})")]
    EnergyConstraint(f64),

    #[error("momentum mismatch: {0}")]
    MomentumMismatch(String),

    #[error("k = {k} lies within {half_width:e} of the pole at 1/sqrt(2) with c != 0")]
    Singularity { k: f64, half_width: f64 },

    #[error("momentum k = {0} outside the admissible interval")]
    MomentumOutOfRange(f64),

    #[error("invalid amplitude entry: {0}")]
    InvalidAmplitude(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid quadrature rule: {0}")]
    InvalidQuadrature(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
