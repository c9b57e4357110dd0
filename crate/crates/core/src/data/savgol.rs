use nalgebra::{DMatrix, DVector};

use super::{DataError, Dataset, Result};

fn check_params(window: usize, order: usize) -> Result<()> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(DataError::Filter(format!(
            "window must be odd and at least 3, got {window}"
        )));
    }
    if order >= window {
        return Err(DataError::Filter(format!(
            "polynomial order {order} must be below the window length {window}"
        )));
    }
    Ok(())
}

/// Least-squares smoothing weights for a window of `window` equally spaced
/// samples, evaluating the fitted polynomial of degree `order` at sample
/// `pos` (0-based within the window). The filtered value is the dot product
/// of these weights with the window samples.
pub fn savitzky_golay_weights(window: usize, order: usize, pos: usize) -> Result<Vec<f64>> {
    check_params(window, order)?;
    if pos >= window {
        return Err(DataError::Filter(format!(
            "evaluation position {pos} outside window of {window}"
        )));
    }
    let half = (window / 2) as f64;
    // Offsets are measured from the evaluation point, so the fitted value
    // there is the constant coefficient. Scaling by the half width keeps the
    // Vandermonde columns comparable in size.
    let vander = DMatrix::from_fn(window, order + 1, |i, k| {
        ((i as f64 - pos as f64) / half).powi(k as i32)
    });
    let qr = vander.qr();
    let r = qr.r();
    let q = qr.q();
    let mut e0 = DVector::zeros(order + 1);
    e0[0] = 1.0;
    let u = r
        .transpose()
        .solve_lower_triangular(&e0)
        .ok_or_else(|| DataError::Filter("singular Vandermonde system".into()))?;
    Ok((q * u).iter().copied().collect())
}

/// Savitzky–Golay smoothing of an evenly sampled series.
///
/// Interior points use the centred window. The first and last `window / 2`
/// points reuse the polynomial fitted to the first (or last) full window,
/// evaluated at the boundary point itself, so polynomials of degree up to
/// `order` pass through unchanged everywhere.
pub fn savitzky_golay(series: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    check_params(window, order)?;
    let n = series.len();
    if n < window {
        return Err(DataError::Filter(format!(
            "series length {n} is shorter than the window {window}"
        )));
    }
    let half = window / 2;
    let weights: Vec<Vec<f64>> = (0..window)
        .map(|pos| savitzky_golay_weights(window, order, pos))
        .collect::<Result<_>>()?;

    let dot = |w: &[f64], start: usize| -> f64 {
        w.iter().zip(&series[start..start + window]).map(|(a, b)| a * b).sum()
    };
    let out = (0..n)
        .map(|i| {
            if i < half {
                dot(&weights[i], 0)
            } else if i + half >= n {
                dot(&weights[window - (n - i)], n - window)
            } else {
                dot(&weights[half], i - half)
            }
        })
        .collect();
    Ok(out)
}

/// Smooths every feature column and the target, each as a sequence in row
/// order.
pub fn smooth_dataset(ds: &Dataset, window: usize, order: usize) -> Result<Dataset> {
    let mut out = ds.clone();
    for j in 0..ds.n_features() {
        let col: Vec<f64> = ds.features.column(j).iter().copied().collect();
        let smoothed = savitzky_golay(&col, window, order)?;
        out.features.column_mut(j).copy_from_slice(&smoothed);
    }
    let smoothed = savitzky_golay(ds.target.as_slice(), window, order)?;
    out.target.copy_from_slice(&smoothed);
    Ok(out)
}
