use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_local_surrogate, perturb_samples, proximity_weights, LimeConfig, LimeError, Result};
use crate::gp::TrainedGP;

/// Anything that maps input rows to a scalar prediction.
pub trait Regressor: Sync {
    fn n_features(&self) -> usize;
    fn predict_mean(&self, x: &DMatrix<f64>) -> Result<DVector<f64>>;
}

impl Regressor for TrainedGP {
    fn n_features(&self) -> usize {
        TrainedGP::n_features(self)
    }

    fn predict_mean(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        TrainedGP::predict_mean(self, x).map_err(|e| LimeError::Model(e.to_string()))
    }
}

/// Adapts a row function into a [`Regressor`].
pub struct FnModel<F> {
    pub d: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Regressor for FnModel<F> {
    fn n_features(&self) -> usize {
        self.d
    }

    fn predict_mean(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_fn(x.nrows(), |i, _| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            (self.f)(&row)
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    /// Row of the explained instance in the explained set.
    pub instance: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub kernel_width: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Explains the model's mean prediction around `x` with `cfg.seed`.
pub fn explain_instance<M: Regressor + ?Sized>(
    model: &M,
    x: &[f64],
    cfg: &LimeConfig,
    instance: usize,
) -> Result<LocalExplanation> {
    let d = model.n_features();
    if x.len() != d {
        return Err(LimeError::Dimension(format!("model has {d} inputs, instance has {}", x.len())));
    }
    cfg.validate(d)?;
    let width = cfg.kernel_width_for(d);
    let z = perturb_samples(x, cfg);
    let y = model.predict_mean(&z)?;
    let w = proximity_weights(x, &z, width);
    let fit = fit_local_surrogate(&z, y.as_slice(), &w, cfg.l1_penalty)?;
    Ok(LocalExplanation {
        instance,
        intercept: fit.intercept,
        coefficients: fit.coefficients,
        r2: fit.r2,
        kernel_width: width,
        samples: cfg.samples,
        seed: cfg.seed,
    })
}

/// Explains every row of `x`. Row `k` uses seed `cfg.seed + k`, so the
/// output does not depend on scheduling; rows run in parallel.
pub fn explain_all<M: Regressor + ?Sized>(
    model: &M,
    x: &DMatrix<f64>,
    cfg: &LimeConfig,
) -> Result<Vec<LocalExplanation>> {
    cfg.validate(model.n_features())?;
    (0..x.nrows())
        .into_par_iter()
        .map(|k| {
            let row: Vec<f64> = x.row(k).iter().copied().collect();
            let local = LimeConfig {
                seed: cfg.seed.wrapping_add(k as u64),
                ..cfg.clone()
            };
            explain_instance(model, &row, &local, k)
        })
        .collect()
}
