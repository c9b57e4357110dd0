//! Exact Gaussian process regression for tabular drilling data.
//!
//! The crate covers the whole modelling loop:
//!
//! * [`data`]: CSV ingest against a column schema, deduplication,
//!   Savitzky–Golay smoothing, z-score scaling and stratified splitting.
//! * [`gp`]: ARD squared-exponential kernel, log marginal likelihood with
//!   analytic gradient, hyperparameter fitting and posterior prediction.
//! * [`lbfgs`]: limited-memory BFGS with a strong-Wolfe line search.
//! * [`lime`]: local surrogate explanations, global importance scores and
//!   feature selection.
//! * [`pipeline`]: the file-based stages behind the `gplime` CLI.
//! * [`synth`]: synthetic datasets with known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod gp;
pub mod lbfgs;
pub mod lime;
pub mod pipeline;
pub mod synth;

pub use data::{ColumnSchema, Dataset, Role, ScalingParams, SplitSpec};
pub use gp::{KernelHyperparams, KernelMode, LogParams, Prediction, TrainedGP};
pub use lbfgs::{LbfgsConfig, OptResult};
pub use lime::{GlobalImportanceReport, LimeConfig, LocalExplanation};

