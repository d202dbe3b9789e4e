use thiserror::Error;

/// Errors produced by the estimators and their applications.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: all points coincide")]
    DegenerateGeometry,

    #[error("singular linear system (size {size}, regularization {lambda})")]
    Singular { size: usize, lambda: f64 },

    #[error("{folds} folds requested but only {available} samples available")]
    TooManyFolds { folds: usize, available: usize },

    #[error("labels are required for this operation")]
    MissingLabels,

    #[error("labels must contain at least one inlier and one outlier")]
    SingleClass,

    #[error("malformed document: {0}")]
    Parse(String),

    #[error("unsupported dimension {0}: only one-dimensional specs are supported")]
    UnsupportedDimension(usize),
}

impl Error {
    /// True for failures of the numerical pipeline rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::DegenerateGeometry)
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
