//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VivError {
    /// A physical or model parameter is outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// The integrated state blew up (non-finite values or |q| past the guard).
    #[error("simulation diverged: {0}")]
    Divergence(String),

    /// Free-decay system identification could not extract the requested quantity.
    #[error("identification failed: {0}")]
    Identification(String),

    /// Vector/matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A motor command arrived off the command grid.
    #[error("command scheduling violation: {0}")]
    Scheduling(String),

    /// A motor command value is unusable (non-finite).
    #[error("bad motor command: {0}")]
    Command(String),

    /// Training produced non-finite quantities; diagnostics attached.
    #[error("training error: {0}")]
    Training(String),

    /// The signal has no identifiable dominant frequency.
    #[error("no dominant frequency: {0}")]
    NoDominantFrequency(String),

    /// No wake-parameter candidate met the calibration targets.
    /// The message embeds the best candidate found and its residual.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Configuration file problems; lists every offending key.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VivError>;
