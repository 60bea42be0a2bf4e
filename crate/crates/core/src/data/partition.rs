use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, INCIPIENT_SEVERITIES, MAX_SEVERITY};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the development-side incipient examples that is kept.
    pub rho: f64,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho {} outside [0, 1]", self.rho)));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config(format!("dev_fraction {} outside (0, 1)", self.dev_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub dev: Dataset,
    pub test: Dataset,
    /// Source indices of `dev` examples, in `dev` order.
    pub dev_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Development-side incipient examples dropped by `rho`.
    pub discarded: Vec<usize>,
}

fn cells(data: &Dataset) -> BTreeMap<(u8, u32), Vec<usize>> {
    let mut cells: BTreeMap<(u8, u32), Vec<usize>> = BTreeMap::new();
    for (i, e) in data.examples.iter().enumerate() {
        cells.entry((e.severity, e.fault_id)).or_default().push(i);
    }
    cells
}

fn shuffled(mut idx: Vec<usize>, seed: u64, tag: &str, key: (u8, u32)) -> Vec<usize> {
    let mut rng = derive_rng(seed, tag, (u64::from(key.0) << 32) | u64::from(key.1));
    idx.shuffle(&mut rng);
    idx
}

fn share(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round().min(n as f64) as usize
}

/// Split into development and test sets, stratified by (severity, fault).
///
/// Every stratum is shuffled once with a seed that does not depend on
/// `rho`, so the retained incipient development examples for a smaller
/// `rho` are a prefix of those for a larger one. Incipient examples cut
/// from the development side are dropped, never moved to test.
pub fn partition(data: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    spec.validate()?;
    for sl in 0..=MAX_SEVERITY {
        if data.count_severity(sl) == 0 {
            return Err(Error::EmptyStratum { stratum: format!("SL{sl}") });
        }
    }

    let mut dev_indices = Vec::new();
    let mut test_indices = Vec::new();
    let mut discarded = Vec::new();
    for (key, idx) in cells(data) {
        let order = shuffled(idx, spec.seed, "partition", key);
        let n_dev = share(order.len(), spec.dev_fraction);
        let (dev_side, test_side) = order.split_at(n_dev);
        if INCIPIENT_SEVERITIES.contains(&key.0) {
            let keep = share(dev_side.len(), spec.rho);
            dev_indices.extend_from_slice(&dev_side[..keep]);
            discarded.extend_from_slice(&dev_side[keep..]);
        } else {
            dev_indices.extend_from_slice(dev_side);
        }
        test_indices.extend_from_slice(test_side);
    }

    Ok(Partition {
        dev: data.select(&dev_indices),
        test: data.select(&test_indices),
        dev_indices,
        test_indices,
        discarded,
    })
}

/// Stratified split of a development set into a fitting part and a
/// calibration part holding `fraction` of each stratum.
pub fn holdout(dev: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("calibration fraction {fraction} outside (0, 1)")));
    }
    let mut fit = Vec::new();
    let mut calibration = Vec::new();
    for (key, idx) in cells(dev) {
        let order = shuffled(idx, seed, "holdout", key);
        let n_cal = share(order.len(), fraction);
        calibration.extend_from_slice(&order[..n_cal]);
        fit.extend_from_slice(&order[n_cal..]);
    }
    Ok((dev.select(&fit), dev.select(&calibration)))
}
