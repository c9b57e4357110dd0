use nalgebra::DMatrix;

use super::{GpError, KernelHyperparams, Result};

#[inline]
pub(crate) fn se_kernel(a: &[f64], b: &[f64], inv_l2: &[f64], sf2: f64) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(inv_l2)
        .map(|((x, y), w)| (x - y) * (x - y) * w)
        .sum();
    sf2 * (-0.5 * r2).exp()
}

pub(crate) fn inv_sq_lengths(h: &KernelHyperparams) -> Vec<f64> {
    h.length_scales.iter().map(|l| 1.0 / (l * l)).collect()
}

/// Row-major copy of the matrix rows.
pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// `σ_f² exp(-½ Σ_j (x_j - x'_j)² / ℓ_j²)`.
pub fn kernel_eval(x: &[f64], x_prime: &[f64], h: &KernelHyperparams) -> Result<f64> {
    if x.len() != h.dim() || x_prime.len() != h.dim() {
        return Err(GpError::Dimension(format!(
            "kernel over {} inputs applied to vectors of length {} and {}",
            h.dim(),
            x.len(),
            x_prime.len()
        )));
    }
    Ok(se_kernel(x, x_prime, &inv_sq_lengths(h), h.signal_std * h.signal_std))
}

/// Cross-covariance between the rows of `a` (n×d) and `b` (m×d).
pub fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, h: &KernelHyperparams) -> Result<DMatrix<f64>> {
    if a.ncols() != h.dim() || b.ncols() != h.dim() {
        return Err(GpError::Dimension(format!(
            "kernel over {} inputs applied to matrices with {} and {} columns",
            h.dim(),
            a.ncols(),
            b.ncols()
        )));
    }
    let inv_l2 = inv_sq_lengths(h);
    let sf2 = h.signal_std * h.signal_std;
    let ra = rows(a);
    let rb = rows(b);
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        se_kernel(&ra[i], &rb[j], &inv_l2, sf2)
    }))
}
