use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by any stage of the workflow.
#[derive(Debug, Error)]
pub enum DivaError {
    #[error("invalid wavenumber grid: {0}")]
    InvalidGrid(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("trim window excludes all samples")]
    EmptyTrim,

    #[error("degenerate normalization: every intensity is zero")]
    DegenerateNormalization,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("unknown condition label {0:?}")]
    UnknownLabel(String),

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DivaError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DivaError>;

impl DivaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DivaError::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            DivaError::Stage { .. } => self,
            other => DivaError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &DivaError {
        match self {
            DivaError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 for data errors, 3 for training divergence.
    /// Usage errors (code 1) are produced by the argument parser.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            DivaError::TrainingDiverged { .. } => 3,
            DivaError::InvalidConfig(_) => 1,
            _ => 2,
        }
    }
}
