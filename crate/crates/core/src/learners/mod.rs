//! Base learners: CART decision trees and one-hidden-layer networks. Both
//! emit an anomaly score in `[0, 1]`.

mod net;
mod tree;

pub use net::{Mlp, NetParams};
pub use tree::{DecisionTree, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Borrowed training rows with binary labels.
#[derive(Debug, Clone)]
pub struct Samples<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<bool>,
}

impl<'a> Samples<'a> {
    pub fn new(rows: Vec<&'a [f64]>, labels: Vec<bool>) -> Self {
        assert_eq!(rows.len(), labels.len(), "rows and labels differ in length");
        Samples { rows, labels }
    }

    pub fn from_dataset(data: &'a crate::data::Dataset) -> Self {
        Samples::new(data.features(), data.labels())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|z| *z) && self.labels.iter().any(|z| !*z)
    }

    fn check_trainable(&self) -> Result<()> {
        if !self.has_both_classes() {
            return Err(Error::Training("training data must contain both classes".into()));
        }
        let d = self.dim();
        if let Some(r) = self.rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Ok(())
    }

    /// FNV-1a digest of the feature bits and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        for (row, z) in self.rows.iter().zip(&self.labels) {
            for v in *row {
                eat(&v.to_bits().to_le_bytes());
            }
            eat(&[u8::from(*z)]);
        }
        h
    }
}

/// Learner family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum LearnerSpec {
    Tree(TreeParams),
    Net(NetParams),
}

impl LearnerSpec {
    pub fn family(&self) -> &'static str {
        match self {
            LearnerSpec::Tree(_) => "tree",
            LearnerSpec::Net(_) => "net",
        }
    }

    /// Train with `seed` replacing any seed held in the parameters.
    pub fn train(&self, samples: &Samples<'_>, seed: u64) -> Result<BaseModel> {
        match self {
            LearnerSpec::Tree(p) => train_tree(samples, p),
            LearnerSpec::Net(p) => train_net(samples, &NetParams { seed, ..p.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelKind {
    Tree(DecisionTree),
    Net(Mlp),
}

/// A trained, immutable scoring model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModel {
    pub dim: usize,
    pub fingerprint: u64,
    pub model: ModelKind,
}

impl BaseModel {
    pub fn family(&self) -> &'static str {
        match self.model {
            ModelKind::Tree(_) => "tree",
            ModelKind::Net(_) => "net",
        }
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        match &self.model {
            ModelKind::Tree(t) => t.predict(x),
            ModelKind::Net(n) => n.predict(x),
        }
    }

    pub fn score_one(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.score_unchecked(x))
    }

    pub fn score<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.score_one(r.as_ref())).collect()
    }
}

pub fn train_tree(samples: &Samples<'_>, params: &TreeParams) -> Result<BaseModel> {
    samples.check_trainable()?;
    params.validate()?;
    Ok(BaseModel {
        dim: samples.dim(),
        fingerprint: samples.fingerprint(),
        model: ModelKind::Tree(DecisionTree::fit(samples, params)),
    })
}

pub fn train_net(samples: &Samples<'_>, params: &NetParams) -> Result<BaseModel> {
    samples.check_trainable()?;
    params.validate()?;
    Ok(BaseModel {
        dim: samples.dim(),
        fingerprint: samples.fingerprint(),
        model: ModelKind::Net(Mlp::fit(samples, params)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_is_rejected() {
        let rows = [vec![0.0], vec![1.0]];
        let s = Samples::new(rows.iter().map(|r| r.as_slice()).collect(), vec![true, true]);
        assert!(matches!(train_tree(&s, &TreeParams::default()), Err(Error::Training(_))));
        assert!(matches!(train_net(&s, &NetParams::default()), Err(Error::Training(_))));
    }

    #[test]
    fn scoring_checks_dimension() {
        let rows = [vec![0.0, 0.0], vec![1.0, 1.0]];
        let s = Samples::new(rows.iter().map(|r| r.as_slice()).collect(), vec![false, true]);
        let m = train_tree(&s, &TreeParams::default()).unwrap();
        assert!(matches!(m.score_one(&[0.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert_eq!(m.score(&rows).unwrap(), vec![0.0, 1.0]);
    }
}
