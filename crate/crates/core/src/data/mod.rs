//! Loading and preparing tabular datasets.

mod dataset;
mod savgol;
mod scaling;
mod schema;
mod split;

pub use dataset::{deduplicate, load_dataset, read_dataset, write_dataset, Dataset};
pub use savgol::{savitzky_golay, savitzky_golay_weights, smooth_dataset};
pub use scaling::{standardize, ScalingParams};
pub use schema::{default_schema, load_schema, ColumnSchema, Role};
pub use split::{split, SplitIndices, SplitSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("input has no data rows")]
    Empty,
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("row {row}, column \"{column}\": cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column \"{column}\": non-finite value {value:?}")]
    NonFinite {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column \"{0}\" is constant; standard deviation is zero")]
    ConstantColumn(String),
    #[error("need at least 2 rows to estimate scaling, got {0}")]
    TooFewRows(usize),
    #[error("savitzky-golay: {0}")]
    Filter(String),
    #[error("split: {0}")]
    Split(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;
