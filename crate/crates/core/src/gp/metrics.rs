use serde::{Deserialize, Serialize};

use super::{GpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rmse: f64,
    pub r2: f64,
}

/// Root mean squared error and coefficient of determination.
pub fn score(predicted: &[f64], actual: &[f64]) -> Result<Score> {
    if predicted.len() != actual.len() {
        return Err(GpError::Dimension(format!(
            "{} predictions for {} actual values",
            predicted.len(),
            actual.len()
        )));
    }
    let n = actual.len();
    if n < 2 {
        return Err(GpError::TooFew { need: 2, got: n });
    }
    let mean = actual.iter().sum::<f64>() / n as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(GpError::ZeroVariance);
    }
    let sse: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum();
    Ok(Score {
        rmse: (sse / n as f64).sqrt(),
        r2: 1.0 - sse / sst,
    })
}

/// Fraction of `actual` values inside `[lower, upper]`.
pub fn coverage(actual: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let inside = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(a, (l, u))| *l <= *a && *a <= *u)
        .count();
    inside as f64 / actual.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_baseline() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let s = score(&a, &a).unwrap();
        assert_eq!((s.rmse, s.r2), (0.0, 1.0));
        let m = [3.75; 4];
        assert!(score(&m, &a).unwrap().r2.abs() < 1e-15);
    }

    #[test]
    fn hand_arithmetic() {
        // SSE = 1, SST = 2, n = 3
        let s = score(&[1.0, 2.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((s.rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.r2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(score(&[1.0, 1.0], &[2.0, 2.0]), Err(GpError::ZeroVariance)));
        assert!(matches!(score(&[1.0], &[2.0]), Err(GpError::TooFew { .. })));
        assert!(score(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn coverage_counts_inclusive_bounds() {
        assert_eq!(coverage(&[0.0, 1.0, 5.0, 2.0], &[0.0, 0.0, 0.0, 3.0], &[1.0, 1.0, 1.0, 4.0]), 0.5);
    }
}
