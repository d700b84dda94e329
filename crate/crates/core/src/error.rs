use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the measures, estimators, loaders, and trainer.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data was rejected before any computation (non-finite entries, bad shapes).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A scalar or structural parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Shapes of two operands disagree.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// Data carries no usable signal for the requested measure.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A weight column with zero norm makes the cosine undefined.
    #[error("weight column {column} has zero norm")]
    DegenerateColumn { column: usize },

    /// A Gram-like matrix had an eigenvalue below the clamping tolerance.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("IDX {file}: bad magic 0x{found:08x} (expected 0x{expected:08x}) at offset 0")]
    IdxBadMagic {
        file: String,
        expected: u32,
        found: u32,
    },

    #[error("IDX {file}: truncated at offset {offset}, needed {needed} more bytes")]
    IdxTruncated {
        file: String,
        offset: usize,
        needed: usize,
    },

    #[error("IDX {file}: declared size {declared} bytes but payload holds {actual} bytes (offset {offset})")]
    IdxSizeMismatch {
        file: String,
        offset: usize,
        declared: usize,
        actual: usize,
    },

    #[error("IDX image count {images} does not match label count {labels}")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("CSV parse error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to choose process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Degenerate,
    Divergence,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Degenerate(_)
            | Error::DegenerateColumn { .. }
            | Error::NotPositiveSemidefinite { .. } => ErrorClass::Degenerate,
            Error::Divergence { .. } => ErrorClass::Divergence,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
