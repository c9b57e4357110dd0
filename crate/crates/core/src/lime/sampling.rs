use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{LimeConfig, Perturbation};

/// `cfg.samples` perturbations of `x` as rows; row 0 is `x` itself.
/// Deterministic for a given `cfg.seed`.
pub fn perturb_samples(x: &[f64], cfg: &LimeConfig) -> DMatrix<f64> {
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = cfg.perturbation_scale;
    let half_width = scale * 3f64.sqrt();
    let mut z = DMatrix::zeros(cfg.samples, d);
    for j in 0..d {
        z[(0, j)] = x[j];
    }
    // Row-major draw order so the stream does not depend on storage layout.
    for i in 1..cfg.samples {
        for j in 0..d {
            let noise = match cfg.distribution {
                Perturbation::Gaussian => scale * rng.sample::<f64, _>(StandardNormal),
                Perturbation::Uniform => rng.random_range(-1.0..1.0) * half_width,
            };
            z[(i, j)] = x[j] + noise;
        }
    }
    z
}

/// `exp(-D(x, z_i)² / σ²)` with Euclidean `D`.
pub fn proximity_weights(x: &[f64], z: &DMatrix<f64>, width: f64) -> Vec<f64> {
    let s2 = width * width;
    (0..z.nrows())
        .map(|i| {
            let d2: f64 = z.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / s2).exp()
        })
        .collect()
}
