use serde::{Deserialize, Serialize};

use super::{LimeError, LocalExplanation, Result};

/// Coefficients with magnitude at or below this count as zero.
pub const NONZERO_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    #[default]
    MeanAbs,
    WeightedMean,
    SupportFreq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: usize,
    /// Mean of |β_j| over local models.
    pub mean_abs: f64,
    /// Mean of signed β_j.
    pub actual_mean: f64,
    /// Fraction of local models with β_j nonzero.
    pub support_freq: f64,
    /// Mean of |β_j| weighted by max(R², 0) of each local model.
    pub weighted_mean: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportanceReport {
    /// One entry per feature, in feature order.
    pub features: Vec<FeatureScore>,
    /// Feature indices, most important first.
    pub ranking: Vec<usize>,
    pub rank_by: RankBy,
    pub explanations: usize,
    /// Set when every local R² was ≤ 0, in which case `weighted_mean`
    /// equals `mean_abs`.
    pub weighted_fallback: bool,
}

impl GlobalImportanceReport {
    pub fn score(&self, j: usize, by: RankBy) -> f64 {
        let f = &self.features[j];
        match by {
            RankBy::MeanAbs => f.mean_abs,
            RankBy::WeightedMean => f.weighted_mean,
            RankBy::SupportFreq => f.support_freq,
        }
    }

    /// Feature indices sorted by `by` descending, ties by ascending index.
    pub fn order_by(&self, by: RankBy) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&a, &b| self.score(b, by).total_cmp(&self.score(a, by)).then(a.cmp(&b)));
        order
    }
}

/// Aggregates local coefficients into global importance scores.
pub fn global_scores(explanations: &[LocalExplanation], rank_by: RankBy) -> Result<GlobalImportanceReport> {
    let first = explanations.first().ok_or(LimeError::Empty)?;
    let d = first.coefficients.len();
    if let Some(e) = explanations.iter().find(|e| e.coefficients.len() != d) {
        return Err(LimeError::Dimension(format!(
            "explanation {} has {} coefficients, expected {d}",
            e.instance,
            e.coefficients.len()
        )));
    }
    let k = explanations.len() as f64;
    let weights: Vec<f64> = explanations.iter().map(|e| e.r2.max(0.0)).collect();
    let weight_sum: f64 = weights.iter().sum();
    let weighted_fallback = !(weight_sum > 0.0);

    let features: Vec<FeatureScore> = (0..d)
        .map(|j| {
            let mut abs_sum = 0.0;
            let mut signed_sum = 0.0;
            let mut support = 0usize;
            let mut weighted = 0.0;
            for (e, w) in explanations.iter().zip(&weights) {
                let b = e.coefficients[j];
                abs_sum += b.abs();
                signed_sum += b;
                if b.abs() > NONZERO_EPS {
                    support += 1;
                }
                weighted += w * b.abs();
            }
            let mean_abs = abs_sum / k;
            FeatureScore {
                feature: j,
                mean_abs,
                actual_mean: signed_sum / k,
                support_freq: support as f64 / k,
                weighted_mean: if weighted_fallback { mean_abs } else { weighted / weight_sum },
                rank: 0,
            }
        })
        .collect();

    let mut report = GlobalImportanceReport {
        features,
        ranking: Vec::new(),
        rank_by,
        explanations: explanations.len(),
        weighted_fallback,
    };
    report.ranking = report.order_by(rank_by);
    for (pos, &j) in report.ranking.clone().iter().enumerate() {
        report.features[j].rank = pos + 1;
    }
    Ok(report)
}
