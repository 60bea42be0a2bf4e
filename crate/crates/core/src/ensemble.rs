//! Bagged ensembles of one learner family, their prediction matrix, and
//! on-disk persistence.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{BaseModel, LearnerSpec, Samples};
use crate::rng::derive_seed;

/// Bootstrap redraws allowed when a resample holds a single class.
pub const MAX_BOOTSTRAP_RETRIES: u64 = 10;

const MANIFEST: &str = "manifest.toml";

/// How member scores are folded into one ensemble score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Combination {
    /// Average of member scores.
    #[default]
    Soft,
    /// Fraction of members whose score exceeds `threshold`.
    Hard { threshold: f64 },
}

/// `m x K` member outputs; row `i` holds every member's score for example `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl PredictionMatrix {
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut values = vec![0.0; rows * cols];
        for (k, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged prediction columns");
            for (i, v) in col.iter().enumerate() {
                values[i * cols + k] = *v;
            }
        }
        PredictionMatrix { rows, cols, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged prediction rows");
        PredictionMatrix { rows: rows.len(), cols, values: rows.concat() }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_members(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, k)).collect()
    }

    /// Matrix restricted to the first `k` members.
    pub fn first_members(&self, k: usize) -> PredictionMatrix {
        let k = k.min(self.cols);
        let values = self.rows().flat_map(|r| r[..k].iter().copied()).collect();
        PredictionMatrix { rows: self.rows, cols: k, values }
    }

    /// Matrix restricted to the given member columns, in the given order.
    pub fn select_members(&self, members: &[usize]) -> PredictionMatrix {
        let values = self.rows().flat_map(|r| members.iter().map(move |&k| r[k])).collect();
        PredictionMatrix { rows: self.rows, cols: members.len(), values }
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> PredictionMatrix {
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        PredictionMatrix { rows: rows.len(), cols: self.cols, values }
    }
}

/// Combine each row into one ensemble score.
pub fn combine(matrix: &PredictionMatrix, mode: Combination) -> Vec<f64> {
    matrix
        .rows()
        .map(|row| {
            let k = row.len() as f64;
            match mode {
                Combination::Soft => row.iter().sum::<f64>() / k,
                Combination::Hard { threshold } => row.iter().filter(|y| **y > threshold).count() as f64 / k,
            }
        })
        .collect()
}

/// Draw `ceil(max_samples * n)` row indices with replacement.
pub fn bootstrap_indices(n: usize, max_samples: f64, seed: u64) -> Vec<usize> {
    let size = ((max_samples * n as f64).ceil() as usize).clamp(1, n.max(1));
    let mut rng = crate::rng::rng_from_seed(seed);
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

/// Seed of the `attempt`-th bootstrap redraw for member `k`.
pub fn bootstrap_seed(master: u64, k: usize, attempt: u64) -> u64 {
    derive_seed(derive_seed(master, "bootstrap", k as u64), "attempt", attempt)
}

pub fn member_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, "member", k as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub learner: LearnerSpec,
    pub max_samples: f64,
    pub master_seed: u64,
    pub combination: Combination,
    pub member_seeds: Vec<u64>,
    pub members: Vec<BaseModel>,
}

fn train_member(
    samples: &Samples<'_>,
    learner: &LearnerSpec,
    max_samples: f64,
    master: u64,
    k: usize,
) -> Result<BaseModel> {
    for attempt in 0..=MAX_BOOTSTRAP_RETRIES {
        let idx = bootstrap_indices(samples.len(), max_samples, bootstrap_seed(master, k, attempt));
        let boot = Samples::new(
            idx.iter().map(|&i| samples.rows[i]).collect(),
            idx.iter().map(|&i| samples.labels[i]).collect(),
        );
        if boot.has_both_classes() {
            return learner.train(&boot, member_seed(master, k));
        }
    }
    Err(Error::Training(format!(
        "member {k}: every bootstrap resample ({} draws) held a single class",
        MAX_BOOTSTRAP_RETRIES + 1
    )))
}

impl EnsembleModel {
    /// Train `k` members, each on its own bootstrap resample of `samples`.
    pub fn train_bagging(
        samples: &Samples<'_>,
        learner: &LearnerSpec,
        k: usize,
        max_samples: f64,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        if !(max_samples > 0.0 && max_samples <= 1.0) {
            return Err(Error::Config(format!("max_samples {max_samples} outside (0, 1]")));
        }
        if !samples.has_both_classes() {
            return Err(Error::Training("development data must contain both classes".into()));
        }
        let members = (0..k)
            .into_par_iter()
            .map(|i| train_member(samples, learner, max_samples, seed, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleModel {
            learner: learner.clone(),
            max_samples,
            master_seed: seed,
            combination: Combination::Soft,
            member_seeds: (0..k).map(|i| member_seed(seed, i)).collect(),
            members,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim
    }

    pub fn with_combination(mut self, combination: Combination) -> Self {
        self.combination = combination;
        self
    }

    /// Sub-ensemble of the given members, in the given order.
    pub fn select(&self, members: &[usize]) -> EnsembleModel {
        EnsembleModel {
            member_seeds: members.iter().map(|&k| self.member_seeds[k]).collect(),
            members: members.iter().map(|&k| self.members[k].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn predict_matrix<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<PredictionMatrix> {
        let columns = self.members.par_iter().map(|m| m.score(rows)).collect::<Result<Vec<_>>>()?;
        Ok(PredictionMatrix::from_columns(&columns))
    }

    pub fn predict<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<f64>> {
        Ok(combine(&self.predict_matrix(rows)?, self.combination))
    }

    /// Write a manifest plus one JSON file per member into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files: Vec<String> = (0..self.size()).map(|k| format!("member_{k:03}.json")).collect();
        for (file, member) in files.iter().zip(&self.members) {
            let path = dir.join(file);
            fs::write(&path, serde_json::to_string(member)?).map_err(|e| Error::io(&path, e))?;
        }
        let manifest = Manifest {
            k: self.size(),
            max_samples: self.max_samples,
            master_seed: self.master_seed,
            combination: self.combination,
            learner: self.learner.clone(),
            member_seeds: self.member_seeds.clone(),
            member_files: files,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, toml::to_string(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = toml::from_str(&text)?;
        if manifest.member_files.len() != manifest.k || manifest.member_seeds.len() != manifest.k {
            return Err(Error::Config(format!("{}: member count does not match k = {}", path.display(), manifest.k)));
        }
        let members = manifest
            .member_files
            .iter()
            .map(|f| {
                let p = dir.join(f);
                let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                Ok(serde_json::from_str(&text)?)
            })
            .collect::<Result<Vec<BaseModel>>>()?;
        Ok(EnsembleModel {
            learner: manifest.learner,
            max_samples: manifest.max_samples,
            master_seed: manifest.master_seed,
            combination: manifest.combination,
            member_seeds: manifest.member_seeds,
            members,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    k: usize,
    max_samples: f64,
    // TOML integers are signed 64-bit; seeds travel as strings.
    #[serde(with = "seed_str")]
    master_seed: u64,
    combination: Combination,
    #[serde(with = "seed_vec_str")]
    member_seeds: Vec<u64>,
    member_files: Vec<String>,
    learner: LearnerSpec,
}

mod seed_str {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

mod seed_vec_str {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|x| x.parse().map_err(serde::de::Error::custom)).collect()
    }
}
