use thiserror::Error;

/// Errors shared across the tracking, learning, and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Every importance weight underflowed to zero; the belief carries no
    /// information and must be reset.
    #[error("all importance weights are zero")]
    AllZeroWeights,

    /// A vector or matrix argument does not match the model dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two paired arguments disagree in length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// The gram matrix stayed non-positive-definite through the whole
    /// jitter escalation schedule.
    #[error("gram matrix is singular even after jitter escalation")]
    SingularGram,

    /// A sequence specification asks for geometry the frame cannot hold.
    #[error("sequence spec out of bounds: {0}")]
    SpecOutOfBounds(String),

    /// A configuration file is malformed or internally inconsistent.
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    /// Training produced non-finite parameters.
    #[error("training diverged: non-finite parameters in {0}")]
    TrainingDiverged(String),

    /// A model or image file has a bad magic number or truncated payload.
    #[error("bad file {path}: {reason}")]
    BadFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
