use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("cannot normalize a vector with norm {0:e}")]
    ZeroVector(f64),

    #[error("rotation axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("rotation plane axes must differ (both {0})")]
    DegeneratePlane(usize),

    #[error("matrix is not orthogonal (residual {0:e})")]
    NotOrthogonal(f64),

    #[error("kernel {family} cannot use label {label}")]
    LabelMismatch { family: &'static str, label: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {need} particles, got {got}")]
    TooFewParticles { need: usize, got: usize },

    #[error("particle counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),

    #[error("cluster {0} has a near-zero mean (norm {1:e}); its center is undefined")]
    DegenerateCluster(usize, f64),

    #[error("empty cluster {0}")]
    EmptyCluster(usize),

    #[error("non-finite state at step {step} (t = {time}), particle {particle}")]
    NonFinite { step: usize, time: f64, particle: usize },

    #[error("quantile function is not monotone at knot {0}")]
    NonMonotoneQuantile(usize),

    #[error("empty grid")]
    EmptyGrid,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
