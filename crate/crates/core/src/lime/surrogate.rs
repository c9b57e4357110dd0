use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LimeError, Result};

/// Coordinate descent stops once no standardized coefficient moves by
/// this much in a sweep.
pub const SWEEP_TOLERANCE: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 10_000;

/// Weighted sparse linear fit `y ≈ intercept + Σ_j coefficients[j]·z_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Weighted coefficient of determination on the fitted sample.
    pub r2: f64,
    pub sweeps: usize,
}

/// Weighted centring and scaling of the design. Columns with zero weighted
/// spread are marked inactive (`scale == 0`).
struct Standardized {
    weights: Vec<f64>,
    z_mean: Vec<f64>,
    scale: Vec<f64>,
    /// Column-major standardized design.
    cols: Vec<Vec<f64>>,
    y_mean: f64,
    y_centered: Vec<f64>,
}

fn check(z: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<()> {
    let (n, d) = z.shape();
    if y.len() != n || weights.len() != n {
        return Err(LimeError::Dimension(format!(
            "{n} samples, {} outputs, {} weights",
            y.len(),
            weights.len()
        )));
    }
    if n < d + 2 {
        return Err(LimeError::Config(format!("{n} samples are too few for {d} features")));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(LimeError::Config("weights must be finite and nonnegative".into()));
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(LimeError::Config("all weights are zero".into()));
    }
    Ok(())
}

fn standardize(z: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Standardized {
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let y_mean: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let y_centered = y.iter().map(|v| v - y_mean).collect();
    let mut z_mean = Vec::with_capacity(z.ncols());
    let mut scale = Vec::with_capacity(z.ncols());
    let mut cols = Vec::with_capacity(z.ncols());
    for col in z.column_iter() {
        let m: f64 = w.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
        let centered: Vec<f64> = col.iter().map(|v| v - m).collect();
        let var: f64 = w.iter().zip(&centered).map(|(a, c)| a * c * c).sum();
        let s = var.sqrt();
        let s = if s > 1e-300 { s } else { 0.0 };
        cols.push(if s > 0.0 {
            centered.iter().map(|c| c / s).collect()
        } else {
            vec![0.0; centered.len()]
        });
        z_mean.push(m);
        scale.push(s);
    }
    Standardized {
        weights: w,
        z_mean,
        scale,
        cols,
        y_mean,
        y_centered,
    }
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Smallest penalty at which every coefficient is zero:
/// `max_j |Σ_i w̄_i z̃_ij ỹ_i|` with normalised weights `w̄`, weighted
/// standardized features `z̃` and weighted-centred outputs `ỹ`.
pub fn lambda_max(z: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<f64> {
    check(z, y, weights)?;
    let s = standardize(z, y, weights);
    Ok(s.cols
        .iter()
        .map(|c| weighted_dot(&s.weights, c, &s.y_centered).abs())
        .fold(0.0, f64::max))
}

/// Fits the local surrogate by cyclic coordinate descent.
///
/// Minimises `½ Σ_i w̄_i (ỹ_i - Σ_j b_j z̃_ij)² + λ Σ_j |b_j|` over the
/// weighted-standardized design, with `w̄` the weights normalised to sum to
/// one. The intercept is unpenalised. Coefficients are reported on the
/// original feature scale.
pub fn fit_local_surrogate(z: &DMatrix<f64>, y: &[f64], weights: &[f64], lambda: f64) -> Result<Surrogate> {
    check(z, y, weights)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(LimeError::Config(format!("L1 penalty {lambda} must be nonnegative")));
    }
    let d = z.ncols();
    if y.iter().all(|&v| v == y[0]) {
        return Ok(Surrogate {
            intercept: y[0],
            coefficients: vec![0.0; d],
            r2: 1.0,
            sweeps: 0,
        });
    }

    let s = standardize(z, y, weights);
    let norms: Vec<f64> = s.cols.iter().map(|c| weighted_dot(&s.weights, c, c)).collect();
    let mut b = vec![0.0; d];
    let mut resid = s.y_centered.clone();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..d {
            if s.scale[j] == 0.0 {
                continue;
            }
            let rho = weighted_dot(&s.weights, &s.cols[j], &resid) + norms[j] * b[j];
            let updated = soft_threshold(rho, lambda) / norms[j];
            let delta = updated - b[j];
            if delta != 0.0 {
                for (r, c) in resid.iter_mut().zip(&s.cols[j]) {
                    *r -= delta * c;
                }
                b[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < SWEEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LimeError::NotConverged { sweeps });
    }

    let coefficients: Vec<f64> = b
        .iter()
        .zip(&s.scale)
        .map(|(bj, sj)| if *sj > 0.0 { bj / sj } else { 0.0 })
        .collect();
    let intercept = s.y_mean - coefficients.iter().zip(&s.z_mean).map(|(c, m)| c * m).sum::<f64>();

    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..z.nrows() {
        let fitted = intercept + z.row(i).iter().zip(&coefficients).map(|(a, c)| a * c).sum::<f64>();
        sse += weights[i] * (y[i] - fitted).powi(2);
        sst += weights[i] * s.y_centered[i].powi(2);
    }
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(Surrogate {
        intercept,
        coefficients,
        r2,
        sweeps,
    })
}
