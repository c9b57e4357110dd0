//! Exact Gaussian process regression with a zero prior mean.
//!
//! The covariance is the squared-exponential kernel with one length scale
//! per input (ARD), optionally tied to a single shared scale. Observation
//! noise enters every solve as `K + σ_n² I`. Hyperparameters are fitted by
//! maximising the log marginal likelihood in log space with L-BFGS.

mod hyper;
mod kernel;
mod likelihood;
mod metrics;
mod model;
mod persist;

pub use hyper::{KernelHyperparams, KernelMode, LogParams};
pub use kernel::{kernel_eval, kernel_matrix};
pub use likelihood::{
    jittered_cholesky, log_marginal_likelihood, lml_value, noisy_covariance, JitterPolicy,
    LmlEval,
};
pub use metrics::{coverage, score, Score};
pub use model::{fit, FitConfig, FitLog, Prediction, RestartLog, TrainedGP, Z_95};
pub use persist::ModelFile;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("covariance not positive definite after jitter up to {max_jitter:e}")]
    Cholesky { max_jitter: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("every optimizer restart failed: {message}")]
    AllRestartsFailed {
        message: String,
        restarts: Vec<RestartLog>,
    },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("actual values have zero variance; R² is undefined")]
    ZeroVariance,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GpError>;
