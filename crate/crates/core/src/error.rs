use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QaaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QaaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} amplitudes, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("memory budget exceeded: {what} needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Resource {
        what: String,
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("integration did not converge within {max_steps} steps (last attempt used {achieved_steps} steps, |dP| = {last_delta:e})")]
    NonConvergence {
        achieved_steps: usize,
        max_steps: usize,
        last_delta: f64,
    },

    #[error("integration quality: norm drift {drift:e} exceeds {limit:e}")]
    IntegrationQuality { drift: f64, limit: f64 },

    #[error("eigensolver did not converge after {iterations} iterations; residuals {residuals:?}")]
    EigenNonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("stoquastic rejection sampling exceeded {0} draws for a single term")]
    RejectionLimit(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("path-change campaign aborted after {} completed trials: {source}", partial.trials.len())]
    CampaignAborted {
        partial: Box<crate::strategies::PathChangeCampaign>,
        #[source]
        source: Box<QaaError>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
}

impl QaaError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        QaaError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QaaError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        QaaError::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }

    /// Stable, machine-readable class name used by the CLI error contract.
    pub fn class(&self) -> &'static str {
        match self {
            QaaError::InvalidArgument(_) | QaaError::DimensionMismatch { .. } => "invalid-argument",
            QaaError::Resource { .. } => "resource",
            QaaError::NonConvergence { .. } | QaaError::EigenNonConvergence { .. } => {
                "non-convergence"
            }
            QaaError::IntegrationQuality { .. } | QaaError::NonFinite(_) => "numerical",
            QaaError::RejectionLimit(_) => "numerical",
            QaaError::CampaignAborted { source, .. } => source.class(),
            QaaError::Io { .. } => "io",
            QaaError::Format { .. } => "format",
        }
    }
}
