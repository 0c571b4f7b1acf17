use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("Lyapunov operator is singular (smallest |λi + λj| = {min_pair_sum:e})")]
    SingularLyapunov { min_pair_sum: f64 },
    #[error("sketch distribution is degenerate: {0}")]
    DegenerateSketchDistribution(String),
    #[error("non-finite value in sketch solver at inner step {step}")]
    NumericalBlowup { step: usize },
    #[error("invalid step index: {0}")]
    InvalidStep(String),
    #[error("covariance estimator has no observations")]
    EmptyEstimator,
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("exact enumeration needs {count} sketch sequences (budget {budget})")]
    EnumTooLarge { count: u128, budget: u128 },
    #[error("spectral bound violated at z = {z}: {detail}")]
    BoundViolated { z: f64, detail: String },
    #[error("no oracle covariance is available: {0}")]
    OracleUnavailable(String),
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
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
