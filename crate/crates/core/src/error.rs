// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Error type shared by every stage of the detector.
#[derive(Debug, Error)]
pub enum VarsegError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("singular Gram block at index {block}")]
    SingularBlock { block: usize },

    #[error("infeasible break subset: {0}")]
    InfeasibleSubset(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<VarsegError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl VarsegError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self::InvalidArgument(message.into())
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Self::Dimension(message.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Self::Stage { .. } => already,
            other => Self::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &VarsegError {
        match self {
            Self::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, VarsegError>;
