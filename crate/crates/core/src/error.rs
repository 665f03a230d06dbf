//! Error type shared by all lab modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("uncovered point at x = {point:?}: partition-of-unity denominator vanishes")]
    UncoveredPoint { point: Vec<f64> },

    #[error("grid under-resolved: spacing {spacing} exceeds required {required}")]
    Resolution { spacing: f64, required: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical inconsistency between routes: max deviation {max_dev} exceeds {tol}")]
    NumericalInconsistency { max_dev: f64, tol: f64 },

    #[error("point {point:?} lies outside every shrunken chart domain")]
    ChartDomain { point: Vec<f64> },

    #[error("incompatible pieces on overlap: worst point {point:?}, deviation {deviation}")]
    Incompatibility { point: Vec<f64>, deviation: f64 },

    #[error("covering schedule cannot resolve the set: {0}")]
    Coverage(String),

    #[error("map is not an isometry for the chosen metric: {0}")]
    NonIsometry(String),

    #[error("transform diverges: {0}")]
    Divergence(String),

    #[error("absolute continuity violated at point {point}: mu = 0 but nu = {nu}")]
    AbsoluteContinuity { point: usize, nu: f64 },

    #[error("method {method} not supported for this integrand: {reason}")]
    UnsupportedMethod { method: String, reason: String },

    #[error("singular derivative map at {0:?}")]
    SingularMap(Vec<f64>),

    #[error("degenerate gauge orbit: {0}")]
    DegenerateOrbit(String),

    #[error("gauge condition degenerate (possible orbit-crossing ambiguity): {0}")]
    GaugeConditionDegenerate(String),

    #[error("propagator pole hit at p^2 = m^2 with zero regulator")]
    Pole,

    #[error("mode off mass shell: omega^2 - k^2 - m^2 = {residual}")]
    OffShell { residual: f64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("vector must have unit norm, got {norm}")]
    NotUnit { norm: f64 },

    #[error("invalid involution tensor: J^2 differs from identity by {deviation}")]
    InvalidTensor { deviation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
