use thiserror::Error;

/// Errors raised by the laboratory. Experiment verdicts (bounded, blow-up,
/// divergent norms) are values, never errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point is not admissible: |z| = {norm} (need |z| <= 1 - 1e-12)")]
    InadmissiblePoint { norm: f64 },

    #[error("dimension mismatch: domain has n = {expected}, got {got} coordinates")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite integrand value at node {index} (coords {coords})")]
    NonFiniteIntegrand { index: usize, coords: String },

    #[error("integration failed at z0 = {z0}: {source}")]
    ProfilePoint {
        z0: String,
        #[source]
        source: Box<LabError>,
    },

    #[error("fit requires {0}")]
    InsufficientData(String),

    #[error("nonpositive sample value {value} at delta = {delta}")]
    NonPositiveSample { delta: f64, value: f64 },

    #[error("measure rejected: {0}")]
    InvalidMeasure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
