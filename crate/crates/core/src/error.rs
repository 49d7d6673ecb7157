use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    ConvergenceFailure { sweeps: usize, off_norm: f64 },

    #[error("dataset generation failed: {0}")]
    GenerationFailure(String),

    #[error("cannot stratify: label {label} has only {count} point(s), need at least 2")]
    StratificationFailure { label: usize, count: usize },

    #[error("filter `{0}` cannot embed points it was not fitted on")]
    OutOfSampleUnsupported(String),

    #[error(
        "training diverged at epoch {epoch}, batch {batch}: recon={recon}, topo_x_to_z={topo_x_to_z}, topo_z_to_x={topo_z_to_x}"
    )]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        recon: f64,
        topo_x_to_z: f64,
        topo_z_to_x: f64,
    },

    #[error("metric undefined: graph has no vertices")]
    MetricUndefined,

    #[error("no defined grid cells for filter `{0}`")]
    SummaryUnavailable(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse failure in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
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

    /// Process exit code for this error class (see README).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::OutOfSampleUnsupported(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Json(_) => 4,
            Error::TrainingDiverged { .. } => 5,
            Error::MetricUndefined | Error::SummaryUnavailable(_) => 6,
            Error::ConvergenceFailure { .. }
            | Error::GenerationFailure(_)
            | Error::StratificationFailure { .. } => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
