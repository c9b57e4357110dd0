use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Number of target-quantile strata.
    pub bins: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
            bins: 10,
        }
    }
}

/// 0-based row indices of each side of a split, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified train/test split.
///
/// Rows are ordered by target (ties by row index) and cut into `bins`
/// contiguous strata of near-equal size. Each stratum contributes
/// `floor(f * size)` training rows, and the remaining training quota
/// (`round(f * n)` overall) goes one row at a time to the strata with the
/// largest fractional remainders, ties broken by a seeded shuffle. Members
/// within a stratum are drawn by a seeded shuffle.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, SplitIndices)> {
    let idx = split_indices(ds.target.as_slice(), spec)?;
    Ok((ds.select_rows(&idx.train), ds.select_rows(&idx.test), idx))
}

pub(crate) fn split_indices(target: &[f64], spec: &SplitSpec) -> Result<SplitIndices> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(DataError::Split(format!("train fraction {f} outside (0, 1)")));
    }
    let n = target.len();
    if spec.bins == 0 {
        return Err(DataError::Split("bin count must be at least 1".into()));
    }
    if n < spec.bins {
        return Err(DataError::Split(format!(
            "{n} rows are too few for {} strata",
            spec.bins
        )));
    }
    let n_train = (f * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::Split(format!(
            "fraction {f} of {n} rows leaves one side empty"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| target[a].total_cmp(&target[b]).then(a.cmp(&b)));
    let strata: Vec<&[usize]> = (0..spec.bins)
        .map(|b| &order[b * n / spec.bins..(b + 1) * n / spec.bins])
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut quota: Vec<usize> = strata.iter().map(|s| (f * s.len() as f64).floor() as usize).collect();
    let mut remaining = n_train - quota.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..strata.len()).collect();
    by_remainder.shuffle(&mut rng);
    let rem = |b: usize| f * strata[b].len() as f64 - quota[b] as f64;
    let rems: Vec<f64> = (0..strata.len()).map(rem).collect();
    // Stable sort keeps the shuffled order among equal remainders.
    by_remainder.sort_by(|&a, &b| rems[b].total_cmp(&rems[a]));
    for &b in &by_remainder {
        if remaining == 0 {
            break;
        }
        if quota[b] < strata[b].len() {
            quota[b] += 1;
            remaining -= 1;
        }
    }

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (stratum, &q) in strata.iter().zip(&quota) {
        let mut members = stratum.to_vec();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}
