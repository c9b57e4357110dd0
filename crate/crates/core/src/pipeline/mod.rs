//! File-based pipeline stages behind the `gplime` command line.
//!
//! Each stage reads the artifacts of earlier stages from the output
//! directory, writes its own atomically, and records their SHA-256 hashes
//! in `manifest.json`.

mod artifacts;
mod config;
mod stages;

pub use artifacts::{
    num, sha256_file, write_atomic, write_csv, write_json, ArtifactRecord, RunManifest, StageRecord,
    MANIFEST_FILE,
};
pub use config::{PreprocessConfig, RunConfig, SmoothingConfig, SyntheticConfig};
pub use stages::{
    cmd_explain, cmd_fit, cmd_predict, cmd_preprocess, cmd_run_all, cmd_select, files, run_stage,
};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::gp::GpError;
use crate::lime::LimeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Fit,
    Predict,
    Explain,
    Select,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Preprocess, Stage::Fit, Stage::Predict, Stage::Explain, Stage::Select];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Fit => "fit",
            Stage::Predict => "predict",
            Stage::Explain => "explain",
            Stage::Select => "select",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{} not found: run {stage} first", path.display())]
    Missing { path: PathBuf, stage: Stage },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: DataError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Lime(#[from] LimeError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    /// 1 for configuration and usage problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
