//! Python bindings: `import gplime`.
//!
//! Matrices are lists of rows. Structured results (hyperparameters, fit
//! logs, explanations, reports, manifests) come back as plain dicts with
//! the same keys as the JSON artifacts.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use gplime_core::data::savitzky_golay as sg_filter;
use gplime_core::gp::{self, FitConfig, ModelFile};
use gplime_core::lbfgs::{self, LbfgsConfig};
use gplime_core::lime::{self, LimeConfig, LocalExplanation, RankBy, SelectionStrategy};
use gplime_core::pipeline::{self, PipelineError, RunConfig, Stage};
use gplime_core::synth;
use gplime_core::{GlobalImportanceReport, KernelHyperparams, KernelMode, TrainedGP};

create_exception!(gplime, GplimeError, PyException);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    GplimeError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let py = obj.py();
    let text: String = PyModule::import(py, "json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn kernel_mode(name: &str) -> PyResult<KernelMode> {
    match name {
        "ard" => Ok(KernelMode::Ard),
        "isotropic" => Ok(KernelMode::Isotropic),
        other => Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
    }
}

/// Exact GP regressor with a squared-exponential kernel.
#[pyclass(name = "GaussianProcess", module = "gplime", frozen)]
struct PyGp {
    inner: TrainedGP,
}

#[pymethods]
impl PyGp {
    /// Fits hyperparameters by maximizing the log marginal likelihood.
    #[staticmethod]
    #[pyo3(signature = (x, y, restarts = 3, seed = 42, kernel = "ard"))]
    fn fit(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, restarts: usize, seed: u64, kernel: &str) -> PyResult<Self> {
        let cfg = FitConfig {
            kernel: kernel_mode(kernel)?,
            restarts,
            seed,
            ..Default::default()
        };
        let x = matrix(&x)?;
        let y = DVector::from_vec(y);
        let inner = py.detach(|| gp::fit(&x, &y, &cfg)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Conditions on `(x, y)` with fixed hyperparameters.
    #[staticmethod]
    #[pyo3(signature = (x, y, signal_std, length_scales, noise_std))]
    fn from_hyperparams(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        signal_std: f64,
        length_scales: Vec<f64>,
        noise_std: f64,
    ) -> PyResult<Self> {
        let h = KernelHyperparams::new(signal_std, length_scales, noise_std).map_err(err)?;
        let inner = TrainedGP::from_hyperparams(matrix(&x)?, DVector::from_vec(y), h, KernelMode::Ard).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = ModelFile::from_json(text).and_then(|m| m.to_model()).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        let symbols = (1..=self.inner.n_features()).map(|j| format!("X{j}")).collect();
        ModelFile::new(&self.inner, None, symbols).to_json().map_err(err)
    }

    /// One dict per row with `mean`, `latent_var`, `observation_var`,
    /// `lower` and `upper`.
    fn predict<'py>(&self, py: Python<'py>, x: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
        let p = self.inner.predict(&matrix(&x)?).map_err(err)?;
        to_py(py, &p)
    }

    fn predict_mean(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let m = self.inner.predict_mean(&matrix(&x)?).map_err(err)?;
        Ok(m.iter().copied().collect())
    }

    fn log_marginal_likelihood(&self) -> PyResult<f64> {
        self.inner.log_marginal_likelihood().map_err(err)
    }

    #[getter]
    fn hyperparams<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.hyperparams)
    }

    #[getter]
    fn fit_log<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.fit_log)
    }

    #[getter]
    fn jitter(&self) -> f64 {
        self.inner.jitter
    }

    #[getter]
    fn n_train(&self) -> usize {
        self.inner.n_train()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn train_x(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.x)
    }

    fn __repr__(&self) -> String {
        let h = &self.inner.hyperparams;
        format!(
            "GaussianProcess(n_train={}, signal_std={:.4}, noise_std={:.4}, length_scales={:?})",
            self.inner.n_train(),
            h.signal_std,
            h.noise_std,
            h.length_scales
        )
    }
}

/// Local surrogate explanations of `model` at each row of `x`.
#[pyfunction]
#[pyo3(signature = (model, x, samples = 1000, l1_penalty = 0.01, kernel_width = None, distribution = "gaussian", perturbation_scale = 1.0, seed = 42))]
#[allow(clippy::too_many_arguments)]
fn explain<'py>(
    py: Python<'py>,
    model: &PyGp,
    x: Vec<Vec<f64>>,
    samples: usize,
    l1_penalty: f64,
    kernel_width: Option<f64>,
    distribution: &str,
    perturbation_scale: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = LimeConfig {
        samples,
        kernel_width,
        distribution: serde_json::from_value(serde_json::Value::String(distribution.into()))
            .map_err(|e| PyValueError::new_err(e.to_string()))?,
        perturbation_scale,
        l1_penalty,
        seed,
    };
    let x = matrix(&x)?;
    let out = py.detach(|| lime::explain_all(&model.inner, &x, &cfg)).map_err(err)?;
    to_py(py, &out)
}

/// Global importance scores from a list of explanation dicts.
#[pyfunction]
#[pyo3(signature = (explanations, rank_by = "mean_abs"))]
fn global_importance<'py>(
    py: Python<'py>,
    explanations: &Bound<'py, PyAny>,
    rank_by: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let ex: Vec<LocalExplanation> = from_py(explanations)?;
    let by: RankBy = serde_json::from_value(serde_json::Value::String(rank_by.into()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &lime::global_scores(&ex, by).map_err(err)?)
}

/// Feature selection from an importance report and the explanations it
/// was built from; `strategy` is a dict such as
/// `{"strategy": "elbow", "threshold": 0.9}`.
#[pyfunction]
#[pyo3(signature = (report, explanations, strategy = None))]
fn select_features<'py>(
    py: Python<'py>,
    report: &Bound<'py, PyAny>,
    explanations: &Bound<'py, PyAny>,
    strategy: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let report: GlobalImportanceReport = from_py(report)?;
    let ex: Vec<LocalExplanation> = from_py(explanations)?;
    let strategy: SelectionStrategy = match strategy {
        Some(s) => from_py(s)?,
        None => SelectionStrategy::default(),
    };
    let sel = lime::select_features(&report, &ex, &strategy).map_err(err)?;
    to_py(py, &sel)
}

#[pyfunction]
fn savitzky_golay(series: Vec<f64>, window: usize, order: usize) -> PyResult<Vec<f64>> {
    sg_filter(&series, window, order).map_err(err)
}

/// L-BFGS on `fun(x) -> (value, gradient)`.
#[pyfunction]
#[pyo3(signature = (fun, x0, gradient_tolerance = 1e-5, max_iterations = 200, memory = 10))]
fn minimize<'py>(
    py: Python<'py>,
    fun: &Bound<'py, PyAny>,
    x0: Vec<f64>,
    gradient_tolerance: f64,
    max_iterations: usize,
    memory: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = LbfgsConfig {
        gradient_tolerance,
        max_iterations,
        memory,
        ..Default::default()
    };
    let objective = |x: &[f64]| -> PyResult<(f64, Vec<f64>)> { fun.call1((x.to_vec(),))?.extract() };
    match lbfgs::minimize(objective, &x0, &cfg) {
        Ok(r) => to_py(py, &r),
        Err(lbfgs::LbfgsError::Objective { source, .. }) => Err(source),
        Err(e) => Err(err(e)),
    }
}

/// The bundled synthetic drilling dataset as a dict with `columns`,
/// `features` (rows) and `target`.
#[pyfunction]
#[pyo3(signature = (rows = 300, seed = 7))]
fn drilling_dataset<'py>(py: Python<'py>, rows: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let ds = synth::drilling_dataset(rows, seed).map_err(err)?;
    let columns: Vec<&str> = ds.feature_columns().map(|c| c.symbol.as_str()).collect();
    let value = serde_json::json!({
        "columns": columns,
        "target_column": ds.target_column().symbol,
        "features": self::rows(&ds.features),
        "target": ds.target.as_slice(),
    });
    to_py(py, &value)
}

/// Runs one pipeline stage, or every stage when `stage` is None, and
/// returns the manifest.
#[pyfunction]
#[pyo3(signature = (stage = None, config = None, overrides = Vec::new(), seed = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    stage: Option<&str>,
    config: Option<PathBuf>,
    overrides: Vec<String>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let stage: Option<Stage> = stage
        .map(|s| serde_json::from_value(serde_json::Value::String(s.into())))
        .transpose()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let base = match &config {
        Some(p) => RunConfig::load(p).map_err(err)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_overrides(&overrides).map_err(err)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let result: Result<_, PipelineError> = py.detach(|| match stage {
        Some(s) => pipeline::run_stage(s, &cfg),
        None => pipeline::cmd_run_all(&cfg),
    });
    to_py(py, &result.map_err(err)?)
}

#[pymodule]
fn gplime(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GplimeError", m.py().get_type::<GplimeError>())?;
    m.add_class::<PyGp>()?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(global_importance, m)?)?;
    m.add_function(wrap_pyfunction!(select_features, m)?)?;
    m.add_function(wrap_pyfunction!(savitzky_golay, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(drilling_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
