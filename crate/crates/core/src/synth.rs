//! Synthetic datasets with known ground truth, used by the self-test path
//! of the CLI and by the test suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{default_schema, ColumnSchema, DataError, Dataset};
use crate::gp::{jittered_cholesky, kernel_matrix, GpError, JitterPolicy, KernelHyperparams};

/// Schema `X1..Xd` plus target `Y`, all unitless.
pub fn generic_schema(d: usize) -> Vec<ColumnSchema> {
    let mut s: Vec<ColumnSchema> = (1..=d)
        .map(|j| ColumnSchema::feature(&format!("x{j}"), &format!("X{j}"), "-"))
        .collect();
    s.push(ColumnSchema::target("y", "Y", "-"));
    s
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `y = intercept + Σ coefs[j]·x_j + noise_std·ε` with `x ~ U(-1, 1)^d`.
pub fn linear_dataset(
    n: usize,
    coefs: &[f64],
    intercept: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    let d = coefs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |i, _| {
        let clean: f64 = intercept + (0..d).map(|j| coefs[j] * x[(i, j)]).sum::<f64>();
        clean + noise_std * normal(&mut rng)
    });
    Dataset::new(x, y, generic_schema(d))
}

/// Inputs and targets of one side of a split.
pub type XyPair = (DMatrix<f64>, DVector<f64>);

/// Joint draw from a zero-mean GP prior at `n` inputs `x ~ U(-half_width,
/// half_width)^d`.
#[derive(Debug, Clone)]
pub struct GpSample {
    pub x: DMatrix<f64>,
    /// Noise-free latent values.
    pub f: DVector<f64>,
    /// `f` plus independent `N(0, σ_n²)` noise.
    pub y: DVector<f64>,
}

impl GpSample {
    /// Rows `[0, n_train)` and `[n_train, n)` as `(x, y)` pairs.
    pub fn split_at(&self, n_train: usize) -> (XyPair, XyPair) {
        let n = self.x.nrows();
        let d = self.x.ncols();
        (
            (self.x.rows(0, n_train).into_owned(), self.y.rows(0, n_train).into_owned()),
            (
                self.x.view((n_train, 0), (n - n_train, d)).into_owned(),
                self.y.rows(n_train, n - n_train).into_owned(),
            ),
        )
    }
}

pub fn gp_sample(n: usize, h: &KernelHyperparams, half_width: f64, seed: u64) -> Result<GpSample, GpError> {
    h.validate()?;
    let d = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-half_width..half_width));
    let latent = KernelHyperparams {
        noise_std: 0.0,
        ..h.clone()
    };
    let k = kernel_matrix(&x, &x, &latent)?;
    let policy = JitterPolicy {
        initial: 1e-8,
        ..Default::default()
    };
    let (chol, _, _) = jittered_cholesky(&k, &policy)?;
    let z = DVector::from_fn(n, |_, _| normal(&mut rng));
    let f = chol.l() * z;
    let y = DVector::from_fn(n, |i, _| f[i] + h.noise_std * normal(&mut rng));
    Ok(GpSample { x, f, y })
}

/// Symbols of the features that drive the target of [`drilling_dataset`],
/// strongest first.
pub const DRILLING_DRIVERS: [&str; 5] = ["X12", "X11", "X2", "X13", "X17"];

/// Number of exact duplicate rows planted by [`drilling_dataset`].
pub const DRILLING_DUPLICATES: usize = 5;

/// Drilling-shaped dataset with the default 18-feature schema.
///
/// Every feature is a slowly varying AR(1) sequence around a plausible
/// physical level, so row order carries signal the way logged well data
/// does. The mud-loss target depends on [`DRILLING_DRIVERS`] only, plus
/// noise. `DRILLING_DUPLICATES` rows are repeated verbatim right after
/// their originals, so the returned dataset has `n + DRILLING_DUPLICATES`
/// rows.
pub fn drilling_dataset(n: usize, seed: u64) -> Result<Dataset, DataError> {
    // (level, spread) per feature, in schema order X1..X18.
    const LEVELS: [(f64, f64); 18] = [
        (3_410_000.0, 900.0),
        (452_000.0, 700.0),
        (2_900.0, 450.0),
        (25.0, 9.0),
        (14.0, 5.0),
        (3.0, 1.2),
        (12.25, 2.5),
        (28.0, 7.0),
        (720.0, 110.0),
        (78.0, 4.0),
        (48.0, 6.0),
        (9.0, 2.5),
        (4_300.0, 600.0),
        (6_100.0, 700.0),
        (1.7, 0.15),
        (1.9, 0.3),
        (2_600.0, 350.0),
        (110.0, 25.0),
    ];
    const PHI: f64 = 0.97;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = LEVELS.len();
    let innovation = (1.0 - PHI * PHI).sqrt();
    let mut state: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let mut z = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            if i > 0 {
                state[j] = PHI * state[j] + innovation * normal(&mut rng);
            }
            z[(i, j)] = state[j];
        }
    }
    let (x12, x11, x2, x13, x17) = (11, 10, 1, 12, 16);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r = z.row(i);
            let signal = 6.0 * r[x12] + 4.0 * r[x11] + 3.0 * (1.2 * r[x2]).sin() + 2.0 * r[x13]
                - 1.5 * r[x17];
            30.0 + 2.5 * signal + 1.5 * normal(&mut rng)
        })
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| LEVELS[j].0 + LEVELS[j].1 * z[(i, j)]);

    let mut dup_at: Vec<usize> = Vec::new();
    while dup_at.len() < DRILLING_DUPLICATES.min(n) {
        let i = rng.random_range(0..n);
        if !dup_at.contains(&i) {
            dup_at.push(i);
        }
    }
    let mut order = Vec::with_capacity(n + dup_at.len());
    for i in 0..n {
        order.push(i);
        if dup_at.contains(&i) {
            order.push(i);
        }
    }
    let features = DMatrix::from_fn(order.len(), d, |r, j| x[(order[r], j)]);
    let target = DVector::from_iterator(order.len(), order.iter().map(|&i| y[i]));
    Dataset::new(features, target, default_schema())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::deduplicate;

    #[test]
    fn linear_is_exact_without_noise() {
        let ds = linear_dataset(20, &[2.0, -1.0], 0.5, 0.0, 3).unwrap();
        for i in 0..20 {
            let x = ds.features.row(i);
            assert!((ds.target[i] - (0.5 + 2.0 * x[0] - x[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn gp_sample_noise_level() {
        let h = KernelHyperparams::new(1.0, vec![1.0, 2.0], 0.1).unwrap();
        let s = gp_sample(400, &h, 2.0, 9).unwrap();
        let resid: Vec<f64> = (0..400).map(|i| s.y[i] - s.f[i]).collect();
        let sd = (resid.iter().map(|r| r * r).sum::<f64>() / 400.0).sqrt();
        assert!((sd - 0.1).abs() < 0.015, "{sd}");
        let ((xt, yt), (xs, ys)) = s.split_at(300);
        assert_eq!((xt.nrows(), yt.len(), xs.nrows(), ys.len()), (300, 300, 100, 100));
        assert_eq!(xs.row(0), s.x.row(300));
    }

    #[test]
    fn drilling_has_planted_duplicates() {
        let ds = drilling_dataset(200, 1).unwrap();
        assert_eq!(ds.n_rows(), 200 + DRILLING_DUPLICATES);
        assert_eq!(ds.n_features(), 18);
        let (_, removed) = deduplicate(&ds);
        assert_eq!(removed, DRILLING_DUPLICATES);
        assert_eq!(drilling_dataset(200, 1).unwrap(), ds);
    }
}
