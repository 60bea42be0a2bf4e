use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CsvSchema, GeneratorConfig, LabelingPolicy};
use crate::ensemble::Combination;
use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, TreeParams};
use crate::theory::GridSpec;
use crate::uncertainty::Metric;

/// Uncertainty scoring used to flag negatives: one metric, or the union of
/// the `MEAN` and `VAR` flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Single(Metric),
    MeanVar,
}

impl Method {
    pub fn needs_disagreement(self) -> bool {
        match self {
            Method::Single(m) => m.needs_disagreement(),
            Method::MeanVar => true,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Single(m) => write!(f, "{m}"),
            Method::MeanVar => f.write_str("mean+var"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean+var" | "mean_var" => Ok(Method::MeanVar),
            other => other.parse().map(Method::Single),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Threshold the `MEAN` metric measures its gap against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeanThreshold {
    /// The calibrated detection threshold for the current `q`.
    #[default]
    Calibrated,
    /// A fixed 0.5.
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Input file when `source = "csv"`; relative paths resolve against the
    /// config file's directory.
    pub path: Option<PathBuf>,
    pub policy: LabelingPolicy,
    pub generator: GeneratorConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            source: DataSource::Synthetic,
            path: None,
            policy: LabelingPolicy::Chiller,
            generator: GeneratorConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn csv_schema(&self) -> CsvSchema {
        CsvSchema { dim: None, policy: self.policy }
    }
}

/// Per-example prediction histograms with Beta fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub enabled: bool,
    /// Members trained before drawing the ensemble.
    pub pool: usize,
    /// Members drawn from the pool.
    pub k: usize,
    /// Test examples probed per severity level.
    pub probes_per_severity: usize,
    pub bins: usize,
    /// Seed and `rho` of the run the histograms are taken from.
    pub seed: u64,
    pub rho: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig { enabled: false, pool: 40, k: 25, probes_per_severity: 10, bins: 20, seed: 0, rho: 0.2 }
    }
}

/// A whole sweep. Every key has a default, so an empty file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
    pub k: Vec<usize>,
    pub metrics: Vec<Method>,
    pub dev_fraction: f64,
    /// Share of the development set held out to calibrate `tau` and the
    /// uncertainty threshold; members train on the rest.
    pub calibration_fraction: f64,
    pub max_samples: f64,
    pub combination: Combination,
    pub mean_threshold: MeanThreshold,
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    pub learner: LearnerSpec,
    pub histogram: HistogramConfig,
    pub theory: GridSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: (0..10).collect(),
            rho: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            q: vec![0.01, 0.02, 0.05, 0.1],
            theta: vec![0.05, 0.1, 0.2],
            k: vec![1, 5, 10, 15, 25],
            metrics: vec![
                Method::Single(Metric::Mean),
                Method::Single(Metric::Entropy),
                Method::Single(Metric::Var),
                Method::Single(Metric::Kl),
                Method::MeanVar,
            ],
            dev_fraction: 0.5,
            calibration_fraction: 0.3,
            max_samples: 0.8,
            combination: Combination::Soft,
            mean_threshold: MeanThreshold::Calibrated,
            output: PathBuf::from("results"),
            dataset: DatasetConfig::default(),
            learner: LearnerSpec::Tree(TreeParams::default()),
            histogram: HistogramConfig::default(),
            theory: GridSpec::default(),
        }
    }
}

fn non_empty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Read and validate a config file. A relative CSV path is resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ExperimentConfig::from_toml(&text)?;
        if let (Some(p), Some(dir)) = (&config.dataset.path, path.parent()) {
            if p.is_relative() {
                config.dataset.path = Some(dir.join(p));
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        non_empty("seeds", &self.seeds)?;
        non_empty("rho", &self.rho)?;
        non_empty("q", &self.q)?;
        non_empty("theta", &self.theta)?;
        non_empty("k", &self.k)?;
        non_empty("metrics", &self.metrics)?;
        if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("rho {r} outside [0, 1]")));
        }
        if let Some(q) = self.q.iter().find(|q| !(0.0..1.0).contains(*q)) {
            return Err(Error::Config(format!("q {q} outside [0, 1)")));
        }
        if let Some(t) = self.theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Config(format!("theta {t} outside [0, 1]")));
        }
        if self.k.contains(&0) {
            return Err(Error::Config("ensemble sizes must be positive".into()));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config(format!("dev_fraction {} outside (0, 1)", self.dev_fraction)));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::Config(format!("calibration_fraction {} outside (0, 1)", self.calibration_fraction)));
        }
        if !(self.max_samples > 0.0 && self.max_samples <= 1.0) {
            return Err(Error::Config(format!("max_samples {} outside (0, 1]", self.max_samples)));
        }
        if let Combination::Hard { threshold } = self.combination {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::Config(format!("hard-vote threshold {threshold} outside [0, 1]")));
            }
        }
        if self.dataset.source == DataSource::Csv && self.dataset.path.is_none() {
            return Err(Error::Config("dataset.path is required when dataset.source = \"csv\"".into()));
        }
        self.dataset.generator.validate()?;
        let h = &self.histogram;
        if h.enabled && (h.k == 0 || h.k > h.pool || h.bins == 0 || !(0.0..=1.0).contains(&h.rho)) {
            return Err(Error::Config("histogram needs 0 < k <= pool, bins > 0 and rho in [0, 1]".into()));
        }
        Ok(())
    }

    /// Largest ensemble size in the sweep.
    pub fn max_k(&self) -> usize {
        self.k.iter().copied().max().unwrap_or(1)
    }

    /// Number of result records a run produces.
    pub fn n_records(&self) -> usize {
        self.seeds.len() * self.rho.len() * self.k.len() * self.q.len() * self.theta.len() * self.metrics.len()
    }
}
