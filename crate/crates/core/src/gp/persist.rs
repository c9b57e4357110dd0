use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FitLog, KernelHyperparams, KernelMode, Result, TrainedGP};
use crate::data::ScalingParams;

const FORMAT: &str = "gplime-model/1";

/// JSON form of a trained model. The Cholesky factor is not stored; it is
/// recomputed on load with the recorded jitter, which reproduces the
/// original factor bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub kernel: KernelMode,
    pub hyperparams: KernelHyperparams,
    pub jitter: f64,
    pub feature_symbols: Vec<String>,
    pub scaling: Option<ScalingParams>,
    pub train_x: Vec<Vec<f64>>,
    pub train_y: Vec<f64>,
    pub fit_log: FitLog,
}

impl ModelFile {
    pub fn new(model: &TrainedGP, scaling: Option<ScalingParams>, feature_symbols: Vec<String>) -> Self {
        Self {
            format: FORMAT.to_string(),
            kernel: model.mode,
            hyperparams: model.hyperparams.clone(),
            jitter: model.jitter,
            feature_symbols,
            scaling,
            train_x: (0..model.x.nrows())
                .map(|i| model.x.row(i).iter().copied().collect())
                .collect(),
            train_y: model.y.iter().copied().collect(),
            fit_log: model.fit_log.clone(),
        }
    }

    pub fn to_model(&self) -> Result<TrainedGP> {
        let n = self.train_x.len();
        let d = self.hyperparams.dim();
        if self.train_x.iter().any(|r| r.len() != d) {
            return Err(super::GpError::Dimension("training rows do not match length scales".into()));
        }
        let flat: Vec<f64> = self.train_x.iter().flatten().copied().collect();
        TrainedGP::with_jitter(
            DMatrix::from_row_slice(n, d, &flat),
            DVector::from_vec(self.train_y.clone()),
            self.hyperparams.clone(),
            self.kernel,
            self.jitter,
            self.fit_log.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelFile = serde_json::from_str(text)?;
        m.hyperparams.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
