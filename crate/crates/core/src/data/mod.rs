//! Labeled severity-spectrum data: generation, CSV ingestion, partitioning
//! into development and test sets, and feature standardization.

mod csv_io;
mod generate;
mod partition;
mod standardize;

pub use csv_io::{ingest_csv, read_dataset, write_csv, write_dataset, CsvSchema};
pub use generate::{generate, GeneratorConfig};
pub use partition::{holdout, partition, Partition, SplitSpec};
pub use standardize::Standardizer;

use serde::{Deserialize, Serialize};

/// Highest severity level. SL0 is normal operation.
pub const MAX_SEVERITY: u8 = 4;

/// Severity levels whose development-set share is thinned by the incipient ratio.
pub const INCIPIENT_SEVERITIES: [u8; 2] = [1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    /// Ground truth: `true` for the anomaly class.
    pub z: bool,
    pub severity: u8,
    /// Fault type; 0 is reserved for normal operation.
    pub fault_id: u32,
}

/// Which severity levels count as the anomaly class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelingPolicy {
    /// Every fault severity SL1..SL4 is positive.
    #[default]
    Chiller,
    /// SL1 is a non-referable case and belongs to the negative class.
    Dr,
}

impl LabelingPolicy {
    pub fn positive_severities(self) -> &'static [u8] {
        match self {
            LabelingPolicy::Chiller => &[1, 2, 3, 4],
            LabelingPolicy::Dr => &[2, 3, 4],
        }
    }

    pub fn is_positive(self, severity: u8) -> bool {
        self.positive_severities().contains(&severity)
    }

    /// Positive severities treated as incipient when reporting FNR.
    pub fn incipient_severities(self) -> &'static [u8] {
        match self {
            LabelingPolicy::Chiller => &[1, 2],
            LabelingPolicy::Dr => &[2],
        }
    }

    pub fn non_incipient_severities(self) -> &'static [u8] {
        &[3, 4]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub policy: LabelingPolicy,
    pub examples: Vec<LabeledExample>,
}

impl Dataset {
    pub fn new(dim: usize, policy: LabelingPolicy) -> Self {
        Dataset { dim, policy, examples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.examples.iter().map(|e| e.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.examples.iter().map(|e| e.z).collect()
    }

    pub fn severities(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.severity).collect()
    }

    pub fn count_severity(&self, severity: u8) -> usize {
        self.examples.iter().filter(|e| e.severity == severity).count()
    }

    /// Subset by index, preserving the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            dim: self.dim,
            policy: self.policy,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Re-derive every `z` from a labeling policy.
    pub fn relabel(&mut self, policy: LabelingPolicy) {
        self.policy = policy;
        for e in &mut self.examples {
            e.z = policy.is_positive(e.severity);
        }
    }
}
