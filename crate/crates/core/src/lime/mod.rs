//! Local surrogate explanations of a regression model.
//!
//! For each explained instance: draw perturbations around it, query the
//! model's mean prediction, weight the perturbations by an exponential
//! proximity kernel and fit a weighted L1-penalised linear model. Local
//! coefficients are then aggregated into global importance scores, which
//! drive feature selection.

mod aggregate;
mod explain;
mod sampling;
mod select;
mod surrogate;

pub use aggregate::{global_scores, FeatureScore, GlobalImportanceReport, RankBy, NONZERO_EPS};
pub use explain::{explain_all, explain_instance, FnModel, LocalExplanation, Regressor};
pub use sampling::{perturb_samples, proximity_weights};
pub use select::{elbow_size, select_features, Selection, SelectionStrategy};
pub use surrogate::{fit_local_surrogate, lambda_max, Surrogate, MAX_SWEEPS, SWEEP_TOLERANCE};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coordinate descent did not converge in {sweeps} sweeps")]
    NotConverged { sweeps: usize },
    #[error("no explanations to aggregate")]
    Empty,
    #[error("model prediction failed: {0}")]
    Model(String),
    #[error("feature selection produced no features")]
    EmptySelection,
}

pub type Result<T> = std::result::Result<T, LimeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    #[default]
    Gaussian,
    /// Uniform noise on `±scale·√3`, matching the Gaussian variance.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    /// Perturbations per instance, including the unperturbed instance.
    pub samples: usize,
    /// Proximity kernel width; `None` means `0.75·√d`.
    pub kernel_width: Option<f64>,
    pub distribution: Perturbation,
    /// Noise standard deviation per (standardized) feature.
    pub perturbation_scale: f64,
    pub l1_penalty: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            kernel_width: None,
            distribution: Perturbation::Gaussian,
            perturbation_scale: 1.0,
            l1_penalty: 0.01,
            seed: 42,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(LimeError::Config("need at least one feature".into()));
        }
        if self.samples < d + 2 {
            return Err(LimeError::Config(format!(
                "{} samples are too few for {d} features (need {})",
                self.samples,
                d + 2
            )));
        }
        let width = self.kernel_width_for(d);
        if !(width > 0.0 && width.is_finite()) {
            return Err(LimeError::Config(format!("kernel width {width} must be positive")));
        }
        if !(self.l1_penalty >= 0.0 && self.l1_penalty.is_finite()) {
            return Err(LimeError::Config(format!("L1 penalty {} must be nonnegative", self.l1_penalty)));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(LimeError::Config(format!(
                "perturbation scale {} must be nonnegative",
                self.perturbation_scale
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = LimeConfig::default();
        assert!((c.kernel_width_for(4) - 1.5).abs() < 1e-15);
        assert!(c.validate(18).is_ok());
        assert!(LimeConfig { samples: 5, ..c.clone() }.validate(4).is_err());
        assert!(LimeConfig { kernel_width: Some(0.0), ..c.clone() }.validate(4).is_err());
        assert!(LimeConfig { l1_penalty: -1.0, ..c }.validate(4).is_err());
    }
}
