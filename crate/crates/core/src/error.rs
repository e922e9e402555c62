//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, inference, training, and data
/// ingestion.
///
/// Shape mismatches inside the dense kernels themselves are programmer
/// errors and panic with a message naming both shapes; the `Result`-level
/// variants here cover contract violations reachable through public
/// operation inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("empty input")]
    EmptyInput,

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("enumeration bound exceeded: {states} joint states > 2^{bound_log2}")]
    EnumerationBoundExceeded { states: u128, bound_log2: u32 },

    #[error("no valid mask for this shape after {attempts} rejections")]
    NoValidMask { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient in tensor {tensor}")]
    NonFiniteGradient { tensor: String },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}
