use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("observation {obs} out of range for alphabet of size {size}")]
    ObservationOutOfRange { obs: usize, size: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid Renyi order {0}: must lie in (0,1) or (1,inf)")]
    InvalidOrder(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("expert list is empty")]
    EmptyExperts,

    #[error("kernel set at feature {feature}, label {label} is not a singleton")]
    NonSingletonKernel { feature: usize, label: usize },

    #[error("total gap {total:.6} never reaches the required {required:.6}")]
    InsufficientGap { total: f64, required: f64 },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("survivor set became empty at step {step}")]
    EmptySurvivors { step: usize },

    #[error("run {run} failed: {source}")]
    RunFailed { run: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
