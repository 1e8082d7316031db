use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, JcasError>;

#[derive(Debug, Error)]
pub enum JcasError {
    /// A configuration key is missing, malformed, or violates an invariant.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// The covariance solver hit its iteration cap. The last feasible iterate
    /// is carried so callers can still inspect it.
    #[error(
        "radar covariance solver did not converge after {iterations} iterations \
         (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        last_iterate: Box<crate::linalg::CMat>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Wraps a solver error with the subcarrier it came from (0-based).
    #[error("subcarrier {subcarrier}: {source}")]
    AtSubcarrier {
        subcarrier: usize,
        #[source]
        source: Box<JcasError>,
    },

    /// Wraps an error with the sweep point it came from.
    #[error("sweep point snr={snr_db} dB, rho={rho}, realization {realization}: {source}")]
    AtSweepPoint {
        snr_db: f64,
        rho: f64,
        realization: usize,
        #[source]
        source: Box<JcasError>,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl JcasError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        JcasError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn at_subcarrier(self, subcarrier: usize) -> Self {
        JcasError::AtSubcarrier {
            subcarrier,
            source: Box::new(self),
        }
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        match self {
            JcasError::Config { .. } => true,
            JcasError::AtSubcarrier { source, .. } | JcasError::AtSweepPoint { source, .. } => {
                source.is_config()
            }
            _ => false,
        }
    }
}
