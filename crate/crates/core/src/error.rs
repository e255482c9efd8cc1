use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::mlp::TrainingHistory;

/// Why a model bundle was rejected on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelInvalidReason {
    BadMagic,
    ShapeMismatch,
    NonFinite,
    OrthoFail,
    VersionUnsupported,
}

impl ModelInvalidReason {
    pub fn code(self) -> &'static str {
        match self {
            ModelInvalidReason::BadMagic => "BAD_MAGIC",
            ModelInvalidReason::ShapeMismatch => "SHAPE_MISMATCH",
            ModelInvalidReason::NonFinite => "NON_FINITE",
            ModelInvalidReason::OrthoFail => "ORTHO_FAIL",
            ModelInvalidReason::VersionUnsupported => "VERSION_UNSUPPORTED",
        }
    }
}

impl fmt::Display for ModelInvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("INSUFFICIENT_SAMPLES: need at least {needed} rows, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("SCHEMA_MISMATCH: {0}")]
    SchemaMismatch(String),

    #[error("INVALID_FRACTION: {0} is not in (0, 1)")]
    InvalidFraction(f64),

    #[error("INVALID_COMPONENT_COUNT: requested {requested}, available 1..={available}")]
    InvalidComponentCount { requested: usize, available: usize },

    #[error("NON_FINITE_INPUT: {0}")]
    NonFiniteInput(String),

    #[error("BATCH_TOO_SMALL: training-mode forward needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("NUMERIC_DIVERGENCE at epoch {epoch}")]
    NumericDivergence {
        epoch: usize,
        history: Box<TrainingHistory>,
    },

    #[error("INVALID_CONFIG: {0}")]
    InvalidConfig(String),

    #[error("SINGLE_CLASS: training data contains only label {0}")]
    SingleClass(u8),

    #[error("MODEL_INVALID ({reason}): {detail}")]
    ModelInvalid {
        reason: ModelInvalidReason,
        detail: String,
    },

    #[error("CSV_INVALID: {0}")]
    Csv(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable upper-case code used on the command line and in tests.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            Error::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            Error::InvalidFraction(_) => "INVALID_FRACTION",
            Error::InvalidComponentCount { .. } => "INVALID_COMPONENT_COUNT",
            Error::NonFiniteInput(_) => "NON_FINITE_INPUT",
            Error::BatchTooSmall(_) => "BATCH_TOO_SMALL",
            Error::NumericDivergence { .. } => "NUMERIC_DIVERGENCE",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::SingleClass(_) => "SINGLE_CLASS",
            Error::ModelInvalid { .. } => "MODEL_INVALID",
            Error::Csv(_) => "CSV_INVALID",
            Error::Io { .. } => "IO_ERROR",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn model(reason: ModelInvalidReason, detail: impl Into<String>) -> Self {
        Error::ModelInvalid {
            reason,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
