use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::kernel::{inv_sq_lengths, kernel_matrix, rows};
use super::{GpError, KernelHyperparams, KernelMode, LogParams, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal jitter schedule, relative to the mean of the covariance
/// diagonal: `initial`, then multiplied by `factor` until `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterPolicy {
    pub initial: f64,
    pub factor: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            factor: 10.0,
            max: 1e-4,
        }
    }
}

impl JitterPolicy {
    fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::successors(Some(self.initial), move |r| Some(r * self.factor))
            .take_while(move |r| *r <= self.max * (1.0 + 1e-9))
    }
}

/// `K_f(X, X) + σ_n² I`.
pub fn noisy_covariance(x: &DMatrix<f64>, h: &KernelHyperparams) -> Result<DMatrix<f64>> {
    let mut k = kernel_matrix(x, x, h)?;
    let nv = h.noise_std * h.noise_std;
    for i in 0..k.nrows() {
        k[(i, i)] += nv;
    }
    Ok(k)
}

pub(crate) fn cholesky_with(k: &DMatrix<f64>, jitter: f64) -> Option<Cholesky<f64, Dyn>> {
    let mut m = k.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    Cholesky::new(m)
}

/// Factorizes `k + jitter·I`, escalating the jitter per `policy`. Returns
/// the factorization, the absolute jitter used and its relative level.
pub fn jittered_cholesky(
    k: &DMatrix<f64>,
    policy: &JitterPolicy,
) -> Result<(Cholesky<f64, Dyn>, f64, f64)> {
    let n = k.nrows();
    let mean_diag = k.diagonal().sum() / n as f64;
    for rel in policy.steps() {
        let jitter = rel * mean_diag;
        if let Some(c) = cholesky_with(k, jitter) {
            return Ok((c, jitter, rel));
        }
    }
    Err(GpError::Cholesky {
        max_jitter: policy.max * mean_diag,
    })
}

/// Log marginal likelihood and its gradient with respect to the log
/// parameters of the given kernel mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LmlEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub jitter: f64,
}

pub(crate) fn evaluate(
    h: &KernelHyperparams,
    mode: KernelMode,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    policy: &JitterPolicy,
    with_gradient: bool,
) -> Result<LmlEval> {
    let n = x.nrows();
    if n == 0 || y.len() != n {
        return Err(GpError::Dimension(format!("{n} inputs but {} targets", y.len())));
    }
    let k = noisy_covariance(x, h)?;
    let (chol, jitter, rel) = jittered_cholesky(&k, policy)?;
    let alpha = chol.solve(y);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let value = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;
    if !value.is_finite() {
        return Err(GpError::NonFinite("log marginal likelihood"));
    }
    if !with_gradient {
        return Ok(LmlEval {
            value,
            gradient: Vec::new(),
            jitter,
        });
    }

    // dL/dθ = ½ tr(W ∂K/∂θ) with W = ααᵀ - K⁻¹. The jitter scales with
    // σ_f² + σ_n², so its derivative is folded into the σ_f and σ_n terms.
    let k_inv = chol.inverse();
    let d = x.ncols();
    let xr = rows(x);
    let inv_l2 = inv_sq_lengths(h);
    let sf2 = h.signal_std * h.signal_std;
    let sn2 = h.noise_std * h.noise_std;

    let mut trace_w = 0.0;
    let mut w_dot_kf = 0.0;
    let mut length_terms = vec![0.0; d];
    for a in 0..n {
        let w_aa = alpha[a] * alpha[a] - k_inv[(a, a)];
        trace_w += w_aa;
        w_dot_kf += w_aa * sf2;
        for b in (a + 1)..n {
            let w_ab = alpha[a] * alpha[b] - k_inv[(a, b)];
            let wk = 2.0 * w_ab * k[(a, b)];
            w_dot_kf += wk;
            for j in 0..d {
                let diff = xr[a][j] - xr[b][j];
                length_terms[j] += wk * diff * diff * inv_l2[j];
            }
        }
    }
    let g_signal = 0.5 * (2.0 * w_dot_kf + trace_w * 2.0 * rel * sf2);
    let g_noise = 0.5 * trace_w * (2.0 * sn2 + 2.0 * rel * sn2);
    let mut gradient = vec![g_signal];
    match mode {
        KernelMode::Ard => gradient.extend(length_terms.iter().map(|t| 0.5 * t)),
        KernelMode::Isotropic => gradient.push(0.5 * length_terms.iter().sum::<f64>()),
    }
    gradient.push(g_noise);
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(GpError::NonFinite("likelihood gradient"));
    }
    Ok(LmlEval {
        value,
        gradient,
        jitter,
    })
}

/// Log marginal likelihood at `theta` and its gradient in log space.
pub fn log_marginal_likelihood(
    theta: &LogParams,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mode: KernelMode,
) -> Result<(f64, Vec<f64>)> {
    let h = theta.to_hyperparams(mode, x.ncols())?;
    let e = evaluate(&h, mode, x, y, &JitterPolicy::default(), true)?;
    Ok((e.value, e.gradient))
}

/// Log marginal likelihood value only; accepts zero noise.
pub fn lml_value(h: &KernelHyperparams, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    h.validate()?;
    Ok(evaluate(h, KernelMode::Ard, x, y, &JitterPolicy::default(), false)?.value)
}
