use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

/// Per-column means and sample standard deviations (n - 1 denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

impl ScalingParams {
    /// Estimates scaling from `ds`. Fails on fewer than two rows or on any
    /// constant column.
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let n = ds.n_rows();
        if n < 2 {
            return Err(DataError::TooFewRows(n));
        }
        let names: Vec<&str> = ds.feature_columns().map(|c| c.name.as_str()).collect();
        let mut feature_mean = Vec::with_capacity(ds.n_features());
        let mut feature_std = Vec::with_capacity(ds.n_features());
        for (j, name) in names.iter().enumerate() {
            let (m, s) = mean_std(ds.features.column(j).iter().copied());
            if !(s > 0.0) {
                return Err(DataError::ConstantColumn(name.to_string()));
            }
            feature_mean.push(m);
            feature_std.push(s);
        }
        let (target_mean, target_std) = mean_std(ds.target.iter().copied());
        if !(target_std > 0.0) {
            return Err(DataError::ConstantColumn(ds.target_column().name.clone()));
        }
        Ok(Self {
            feature_mean,
            feature_std,
            target_mean,
            target_std,
        })
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if ds.n_features() != self.feature_mean.len() {
            return Err(DataError::Dimension(format!(
                "scaling has {} features, dataset has {}",
                self.feature_mean.len(),
                ds.n_features()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for (j, mut col) in out.features.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - self.feature_mean[j]) / self.feature_std[j]);
        }
        out.target.apply(|v| *v = self.scale_target(*v));
        Ok(out)
    }

    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut out = ds.clone();
        for (j, mut col) in out.features.column_iter_mut().enumerate() {
            col.apply(|v| *v = *v * self.feature_std[j] + self.feature_mean[j]);
        }
        out.target.apply(|v| *v = self.unscale_target(*v));
        Ok(out)
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }

    pub fn unscale_target_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| self.unscale_target(v))
    }

    /// Restricts the feature statistics to a subset of columns.
    pub fn select_features(&self, columns: &[usize]) -> ScalingParams {
        ScalingParams {
            feature_mean: columns.iter().map(|&j| self.feature_mean[j]).collect(),
            feature_std: columns.iter().map(|&j| self.feature_std[j]).collect(),
            ..self.clone()
        }
    }
}

/// Z-scores every feature and the target of `ds` using its own statistics.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, ScalingParams)> {
    let params = ScalingParams::fit(ds)?;
    Ok((params.apply(ds)?, params))
}
