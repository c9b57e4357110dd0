use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{global_scores, GlobalImportanceReport, LimeError, LocalExplanation, RankBy, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Smallest prefix of the weighted-mean ranking holding `threshold` of
    /// the total weighted-mean mass.
    Elbow {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Features that land in the top-k (k from the elbow rule on the full
    /// set) in at least `inclusion` of `resamples` bootstrap resamples of
    /// the local explanations.
    Bootstrap {
        #[serde(default = "default_resamples")]
        resamples: usize,
        #[serde(default = "default_inclusion")]
        inclusion: f64,
        #[serde(default = "default_threshold")]
        elbow_threshold: f64,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Candidates in ranking order; the caller retrains on growing prefixes
    /// and stops once RMSE improves by less than `improvement_floor`
    /// (relative).
    Forward {
        #[serde(default = "default_floor")]
        improvement_floor: f64,
    },
}

fn default_threshold() -> f64 {
    0.9
}

fn default_resamples() -> usize {
    50
}

fn default_inclusion() -> f64 {
    0.7
}

fn default_seed() -> u64 {
    42
}

fn default_floor() -> f64 {
    0.01
}

impl Default for SelectionStrategy {
    fn default() -> Self {
        SelectionStrategy::Elbow {
            threshold: default_threshold(),
        }
    }
}

impl SelectionStrategy {
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            SelectionStrategy::Bootstrap { resamples, inclusion, elbow_threshold, .. } => {
                SelectionStrategy::Bootstrap {
                    resamples: *resamples,
                    inclusion: *inclusion,
                    elbow_threshold: *elbow_threshold,
                    seed,
                }
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Selected feature indices, most important first.
    pub features: Vec<usize>,
    /// Ordered candidate list the selection was drawn from.
    pub candidates: Vec<usize>,
    /// Bootstrap inclusion frequency per feature (bootstrap strategy only).
    pub frequencies: Option<Vec<f64>>,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(LimeError::Config(format!("{name} {v} outside (0, 1)")))
    }
}

/// Number of leading features (weighted-mean order) needed to reach
/// `threshold` of the total weighted-mean score.
pub fn elbow_size(report: &GlobalImportanceReport, threshold: f64) -> Result<usize> {
    check_unit("elbow threshold", threshold)?;
    let order = report.order_by(RankBy::WeightedMean);
    let scores: Vec<f64> = order.iter().map(|&j| report.features[j].weighted_mean).collect();
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(LimeError::EmptySelection);
    }
    // Relative slack absorbs rounding in the running sum.
    let target = threshold * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for (k, s) in scores.iter().enumerate() {
        cum += s;
        if cum >= target {
            return Ok(k + 1);
        }
    }
    Ok(scores.len())
}

pub fn select_features(
    report: &GlobalImportanceReport,
    explanations: &[LocalExplanation],
    strategy: &SelectionStrategy,
) -> Result<Selection> {
    if report.features.is_empty() {
        return Err(LimeError::Empty);
    }
    match *strategy {
        SelectionStrategy::Elbow { threshold } => {
            let k = elbow_size(report, threshold)?;
            let candidates = report.order_by(RankBy::WeightedMean);
            Ok(Selection {
                features: candidates[..k].to_vec(),
                candidates,
                frequencies: None,
            })
        }
        SelectionStrategy::Bootstrap {
            resamples,
            inclusion,
            elbow_threshold,
            seed,
        } => {
            if resamples < 10 {
                return Err(LimeError::Config(format!("{resamples} bootstrap resamples; need at least 10")));
            }
            check_unit("inclusion threshold", inclusion)?;
            if explanations.is_empty() {
                return Err(LimeError::Empty);
            }
            let k = elbow_size(report, elbow_threshold)?;
            let d = report.features.len();
            let mut counts = vec![0usize; d];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = explanations.len();
            for _ in 0..resamples {
                let sample: Vec<LocalExplanation> = (0..n)
                    .map(|_| explanations[rng.random_range(0..n)].clone())
                    .collect();
                let boot = global_scores(&sample, RankBy::WeightedMean)?;
                for &j in boot.order_by(RankBy::WeightedMean).iter().take(k) {
                    counts[j] += 1;
                }
            }
            let candidates = report.order_by(RankBy::WeightedMean);
            let need = inclusion * resamples as f64 - 1e-9;
            let features: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&j| counts[j] as f64 >= need)
                .collect();
            if features.is_empty() {
                return Err(LimeError::EmptySelection);
            }
            Ok(Selection {
                features,
                candidates,
                frequencies: Some(counts.iter().map(|&c| c as f64 / resamples as f64).collect()),
            })
        }
        SelectionStrategy::Forward { improvement_floor } => {
            if !(improvement_floor >= 0.0) {
                return Err(LimeError::Config("improvement floor must be nonnegative".into()));
            }
            Ok(Selection {
                features: report.ranking.clone(),
                candidates: report.ranking.clone(),
                frequencies: None,
            })
        }
    }
}
