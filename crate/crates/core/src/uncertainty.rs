//! Uncertainty scores over rows of the ensemble prediction matrix.
//!
//! `MEAN` and `ENTROPY` only look at the combined ensemble score; `VAR` and
//! `KL` measure disagreement between members and need at least two of them.
//! Larger scores always mean more uncertain. Logarithms are natural.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::PredictionMatrix;
use crate::error::{Error, Result};

/// Clipping applied before taking logarithms.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mean,
    Entropy,
    Var,
    Kl,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mean, Metric::Entropy, Metric::Var, Metric::Kl];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mean => "mean",
            Metric::Entropy => "entropy",
            Metric::Var => "var",
            Metric::Kl => "kl",
        }
    }

    pub fn needs_disagreement(self) -> bool {
        matches!(self, Metric::Var | Metric::Kl)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown uncertainty metric `{s}`")))
    }
}

fn clip(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

/// Confidence gap `1 - |y - tau|`.
pub fn u_mean(ensemble_score: f64, tau: f64) -> f64 {
    1.0 - (ensemble_score - tau).abs()
}

/// Binary entropy of the ensemble score. The score is folded onto `[0, 0.5]`
/// first so that `y` and `1 - y` give bit-identical values.
pub fn u_entropy(ensemble_score: f64) -> f64 {
    let p = clip(ensemble_score.min(1.0 - ensemble_score));
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// Row mean computed about the first entry, so constant rows are exact.
fn row_mean(row: &[f64]) -> f64 {
    let origin = row[0];
    origin + row.iter().map(|y| y - origin).sum::<f64>() / row.len() as f64
}

/// Sample variance of the member scores (denominator `K - 1`).
pub fn u_var(row: &[f64]) -> Result<f64> {
    if row.len() < 2 {
        return Err(Error::UndefinedMetric("var"));
    }
    let m = row_mean(row);
    Ok(row.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (row.len() - 1) as f64)
}

/// Bernoulli KL divergence `D(p || q)`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let (p, q) = (clip(p), clip(q));
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// Average divergence of each member from the ensemble mean.
pub fn u_kl(row: &[f64]) -> Result<f64> {
    if row.len() < 2 {
        return Err(Error::UndefinedMetric("kl"));
    }
    let m = row_mean(row);
    Ok(row.iter().map(|y| bernoulli_kl(*y, m)).sum::<f64>() / row.len() as f64)
}

/// Per-example scores for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScores {
    pub metric: Metric,
    pub scores: Vec<f64>,
    /// Threshold the `MEAN` gap was measured against.
    pub tau: Option<f64>,
    /// Clip used by `ENTROPY` and `KL`.
    pub epsilon: Option<f64>,
}

impl UncertaintyScores {
    /// `ensemble_scores` is the combined score per row; `tau` is only read by `MEAN`.
    pub fn compute(metric: Metric, matrix: &PredictionMatrix, ensemble_scores: &[f64], tau: f64) -> Result<Self> {
        let scores = match metric {
            Metric::Mean => ensemble_scores.iter().map(|y| u_mean(*y, tau)).collect(),
            Metric::Entropy => ensemble_scores.iter().map(|y| u_entropy(*y)).collect(),
            Metric::Var => matrix.rows().map(u_var).collect::<Result<Vec<_>>>()?,
            Metric::Kl => matrix.rows().map(u_kl).collect::<Result<Vec<_>>>()?,
        };
        Ok(UncertaintyScores {
            metric,
            scores,
            tau: (metric == Metric::Mean).then_some(tau),
            epsilon: matches!(metric, Metric::Entropy | Metric::Kl).then_some(EPSILON),
        })
    }
}

/// Order `candidates` by descending score; ties keep ascending index order.
pub fn rank_uncertain(scores: &[f64], candidates: &[usize]) -> Vec<usize> {
    let mut order = candidates.to_vec();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Union of the uncertain sets picked by two metrics.
pub fn union_mean_var(by_mean: &BTreeSet<usize>, by_var: &BTreeSet<usize>) -> BTreeSet<usize> {
    by_mean.union(by_var).copied().collect()
}
