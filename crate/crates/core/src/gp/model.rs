use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::kernel_matrix;
use super::likelihood::{cholesky_with, evaluate, jittered_cholesky, noisy_covariance, JitterPolicy};
use super::{GpError, KernelHyperparams, KernelMode, LogParams, Result};
use crate::data::ScalingParams;
use crate::lbfgs::{self, LbfgsConfig, LbfgsError, Termination, TraceEntry};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959964;

/// Posterior predictive summary at one query point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    /// Variance of the latent function value.
    pub latent_var: f64,
    /// Latent variance plus noise variance.
    pub observation_var: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Prediction {
    fn new(mean: f64, latent_var: f64, noise_var: f64) -> Self {
        let observation_var = latent_var + noise_var;
        let half = Z_95 * observation_var.sqrt();
        Self {
            mean,
            latent_var,
            observation_var,
            lower: mean - half,
            upper: mean + half,
        }
    }

    /// Maps a prediction on the standardized target scale back to raw
    /// target units.
    pub fn destandardize(&self, scaling: &ScalingParams) -> Prediction {
        let s2 = scaling.target_std * scaling.target_std;
        Prediction {
            mean: scaling.unscale_target(self.mean),
            latent_var: self.latent_var * s2,
            observation_var: self.observation_var * s2,
            lower: scaling.unscale_target(self.lower),
            upper: scaling.unscale_target(self.upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub kernel: KernelMode,
    pub restarts: usize,
    pub optimizer: LbfgsConfig,
    pub jitter: JitterPolicy,
    /// Starting log parameters; `None` uses `LogParams::default_init`.
    pub init: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kernel: KernelMode::Ard,
            restarts: 3,
            optimizer: LbfgsConfig::default(),
            jitter: JitterPolicy::default(),
            init: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartLog {
    pub start: Vec<f64>,
    pub start_lml: Option<f64>,
    pub theta: Option<Vec<f64>>,
    pub lml: Option<f64>,
    pub termination: Option<Termination>,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitLog {
    pub restarts: Vec<RestartLog>,
    pub best_restart: usize,
    pub initial_lml: Option<f64>,
    pub final_lml: f64,
    pub jitter_policy: JitterPolicy,
    pub optimizer: LbfgsConfig,
}

/// A fitted exact GP: training data, hyperparameters and the cached
/// Cholesky factor and weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGP {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub hyperparams: KernelHyperparams,
    pub mode: KernelMode,
    /// Lower-triangular factor of `K + σ_n² I + jitter I`.
    pub chol_l: DMatrix<f64>,
    /// `(K + σ_n² I + jitter I)⁻¹ y`.
    pub alpha: DVector<f64>,
    pub jitter: f64,
    pub fit_log: FitLog,
}

impl TrainedGP {
    /// Conditions a GP with fixed hyperparameters on `(x, y)`.
    pub fn from_hyperparams(
        x: DMatrix<f64>,
        y: DVector<f64>,
        hyperparams: KernelHyperparams,
        mode: KernelMode,
    ) -> Result<Self> {
        Self::condition(x, y, hyperparams, mode, &JitterPolicy::default())
    }

    fn condition(
        x: DMatrix<f64>,
        y: DVector<f64>,
        hyperparams: KernelHyperparams,
        mode: KernelMode,
        policy: &JitterPolicy,
    ) -> Result<Self> {
        check_training(&x, &y, &hyperparams)?;
        let k = noisy_covariance(&x, &hyperparams)?;
        let (chol, jitter, _) = jittered_cholesky(&k, policy)?;
        let alpha = chol.solve(&y);
        Ok(Self {
            chol_l: chol.unpack(),
            alpha,
            x,
            y,
            hyperparams,
            mode,
            jitter,
            fit_log: FitLog::default(),
        })
    }

    /// Rebuilds the factorization with a known absolute jitter. Used when
    /// loading a persisted model so predictions repeat exactly.
    pub fn with_jitter(
        x: DMatrix<f64>,
        y: DVector<f64>,
        hyperparams: KernelHyperparams,
        mode: KernelMode,
        jitter: f64,
        fit_log: FitLog,
    ) -> Result<Self> {
        check_training(&x, &y, &hyperparams)?;
        let k = noisy_covariance(&x, &hyperparams)?;
        let chol = cholesky_with(&k, jitter).ok_or(GpError::Cholesky { max_jitter: jitter })?;
        let alpha = chol.solve(&y);
        Ok(Self {
            chol_l: chol.unpack(),
            alpha,
            x,
            y,
            hyperparams,
            mode,
            jitter,
            fit_log,
        })
    }

    pub fn n_train(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    fn check_query(&self, xq: &DMatrix<f64>) -> Result<()> {
        if xq.ncols() != self.n_features() {
            return Err(GpError::Dimension(format!(
                "model has {} inputs, query has {}",
                self.n_features(),
                xq.ncols()
            )));
        }
        Ok(())
    }

    /// Posterior mean at each query row (standardized units).
    pub fn predict_mean(&self, xq: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_query(xq)?;
        let kq = kernel_matrix(xq, &self.x, &self.hyperparams)?;
        Ok(kq * &self.alpha)
    }

    /// Posterior mean and variances at each query row. The variance uses a
    /// triangular solve against the cached factor.
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        self.check_query(xq)?;
        let kq = kernel_matrix(xq, &self.x, &self.hyperparams)?;
        let mean = &kq * &self.alpha;
        let v = self
            .chol_l
            .solve_lower_triangular(&kq.transpose())
            .ok_or(GpError::NonFinite("triangular solve"))?;
        let sf2 = self.hyperparams.signal_std * self.hyperparams.signal_std;
        let nv = self.hyperparams.noise_std * self.hyperparams.noise_std;
        Ok((0..xq.nrows())
            .map(|i| {
                let latent = (sf2 - v.column(i).norm_squared()).max(0.0);
                Prediction::new(mean[i], latent, nv)
            })
            .collect())
    }

    /// Log marginal likelihood of the training data at the fitted
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        Ok(evaluate(&self.hyperparams, self.mode, &self.x, &self.y, &JitterPolicy::default(), false)?.value)
    }
}

fn check_training(x: &DMatrix<f64>, y: &DVector<f64>, h: &KernelHyperparams) -> Result<()> {
    h.validate()?;
    if x.nrows() == 0 {
        return Err(GpError::TooFew { need: 1, got: 0 });
    }
    if x.nrows() != y.len() {
        return Err(GpError::Dimension(format!("{} inputs but {} targets", x.nrows(), y.len())));
    }
    if x.ncols() != h.dim() {
        return Err(GpError::Dimension(format!(
            "{} length scales for {} inputs",
            h.dim(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Fits hyperparameters by maximising the log marginal likelihood.
///
/// Restart 0 starts from `cfg.init` (or the default); each further restart
/// draws every log parameter uniformly from `[-2, 2]` with a generator
/// seeded by `cfg.seed`. Trial points where the covariance cannot be
/// factorized are rejected by the line search. The restart with the
/// highest final likelihood wins.
pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &FitConfig) -> Result<TrainedGP> {
    if cfg.restarts == 0 {
        return Err(GpError::Optimizer("restarts must be at least 1".into()));
    }
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(GpError::Dimension(format!("{} inputs but {} targets", x.nrows(), y.len())));
    }
    let d = x.ncols();
    let p = LogParams::len_for(cfg.kernel, d);
    let init = match &cfg.init {
        Some(v) if v.len() != p => {
            return Err(GpError::Dimension(format!("init has {} entries, expected {p}", v.len())))
        }
        Some(v) => LogParams(v.clone()),
        None => LogParams::default_init(cfg.kernel, d),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![init.0.clone()];
    for _ in 1..cfg.restarts {
        starts.push((0..p).map(|_| rng.random_range(-2.0..=2.0)).collect());
    }

    let neg_lml = |theta: &[f64]| -> std::result::Result<(f64, Vec<f64>), GpError> {
        let h = match LogParams(theta.to_vec()).to_hyperparams(cfg.kernel, d) {
            Ok(h) => h,
            Err(GpError::NonFinite(_)) => return Ok((f64::INFINITY, vec![f64::NAN; p])),
            Err(e) => return Err(e),
        };
        match evaluate(&h, cfg.kernel, x, y, &cfg.jitter, true) {
            Ok(e) => Ok((-e.value, e.gradient.iter().map(|g| -g).collect())),
            Err(GpError::Cholesky { .. } | GpError::NonFinite(_)) => {
                Ok((f64::INFINITY, vec![f64::NAN; p]))
            }
            Err(e) => Err(e),
        }
    };

    let mut logs = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (r, start) in starts.into_iter().enumerate() {
        let start_lml = neg_lml(&start).ok().map(|(v, _)| -v).filter(|v| v.is_finite());
        let mut log = RestartLog {
            start: start.clone(),
            start_lml,
            theta: None,
            lml: None,
            termination: None,
            iterations: 0,
            evaluations: 0,
            trace: Vec::new(),
            error: None,
        };
        match lbfgs::minimize(neg_lml, &start, &cfg.optimizer) {
            Ok(res) => {
                let lml = -res.value;
                log.theta = Some(res.x.clone());
                log.lml = Some(lml);
                log.termination = Some(res.termination);
                log.iterations = res.iterations;
                log.evaluations = res.evaluations;
                log.trace = res.trace;
                if best.as_ref().is_none_or(|b| lml > b.2) {
                    best = Some((r, res.x, lml));
                }
            }
            Err(LbfgsError::Config(msg)) => return Err(GpError::Optimizer(msg)),
            Err(e) => log.error = Some(e.to_string()),
        }
        logs.push(log);
    }

    let Some((best_restart, theta, final_lml)) = best else {
        let msgs: Vec<String> = logs.iter().filter_map(|l| l.error.clone()).collect();
        return Err(GpError::AllRestartsFailed {
            message: msgs.join("; "),
            restarts: logs,
        });
    };
    let h = LogParams(theta).to_hyperparams(cfg.kernel, d)?;
    let mut model = TrainedGP::condition(x.clone(), y.clone(), h, cfg.kernel, &cfg.jitter)?;
    model.fit_log = FitLog {
        initial_lml: logs[0].start_lml,
        restarts: logs,
        best_restart,
        final_lml,
        jitter_policy: cfg.jitter,
        optimizer: cfg.optimizer.clone(),
    };
    Ok(model)
}
