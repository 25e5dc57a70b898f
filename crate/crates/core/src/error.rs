use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Kraus branch with (numerically) zero weight was applied.
    #[error("zero-probability branch selected (norm^2 = {norm_sq:e})")]
    ZeroProbabilityBranch { norm_sq: f64 },

    /// The paired state was annihilated by the Gram-Schmidt projection.
    #[error("paired state annihilated (norm^2 = {norm_sq:e})")]
    DegeneratePair { norm_sq: f64 },

    #[error("free energy requires discrete measurement outcomes; {0} has continuous outcomes")]
    ContinuousOutcomes(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("schema mismatch in {path}: {reason}")]
    SchemaMismatch { path: PathBuf, reason: String },

    #[error("duplicate trajectory cell {cell} (seed {seed}) in {path}")]
    DuplicateCell {
        path: PathBuf,
        cell: String,
        seed: u64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_bad_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::ContinuousOutcomes(_)
                | Error::SchemaMismatch { .. }
                | Error::DuplicateCell { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
