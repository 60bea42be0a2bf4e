use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::results::ResultRecord;
use crate::error::{Error, Result};

/// Box-plot statistics of one quantity over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub table: String,
    pub family: String,
    pub k: usize,
    pub q: f64,
    pub rho: f64,
    /// Empty for tables that do not depend on the uncertainty metric.
    pub metric: String,
    pub theta: Option<f64>,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linearly interpolated quantile of unsorted values; `None` when empty.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

type Key = (String, usize, u64, u64, String, Option<u64>);

struct Table {
    name: &'static str,
    per_metric: bool,
    value: fn(&ResultRecord) -> Option<f64>,
}

const TABLES: [Table; 4] = [
    Table { name: "fnr_incipient", per_metric: false, value: |r| r.fnr_incipient },
    Table { name: "fnr_non_incipient", per_metric: false, value: |r| r.fnr_non_incipient },
    Table { name: "certain_fn", per_metric: true, value: |r| r.certain_fn.map(|n| n as f64) },
    Table { name: "fn_precision", per_metric: true, value: |r| r.fn_precision },
];

/// Per-figure summary tables over seeds.
///
/// Detection rates do not depend on the uncertainty metric or `theta`, so
/// their tables count each `(seed, family, k, q, rho)` once; the flagging
/// tables are additionally keyed by metric and `theta`. Groups appear in the
/// order of their first record. Only successful records contribute.
pub fn summarize_results(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for table in &TABLES {
        let mut order: Vec<Key> = Vec::new();
        let mut groups: HashMap<Key, Vec<f64>> = HashMap::new();
        let mut seen = HashSet::new();
        for r in records.iter().filter(|r| r.is_ok()) {
            let (metric, theta) =
                if table.per_metric { (r.metric.clone(), Some(r.theta.to_bits())) } else { (String::new(), None) };
            let key: Key = (r.family.clone(), r.k, r.q.to_bits(), r.rho.to_bits(), metric, theta);
            if !table.per_metric && !seen.insert((key.clone(), r.seed)) {
                continue;
            }
            let Some(v) = (table.value)(r) else { continue };
            match groups.get_mut(&key) {
                Some(g) => g.push(v),
                None => {
                    order.push(key.clone());
                    groups.insert(key, vec![v]);
                }
            }
        }
        for key in order {
            let v = &groups[&key];
            rows.push(SummaryRow {
                table: table.name.into(),
                family: key.0.clone(),
                k: key.1,
                q: f64::from_bits(key.2),
                rho: f64::from_bits(key.3),
                metric: key.4.clone(),
                theta: key.5.map(f64::from_bits),
                n: v.len(),
                min: quantile(v, 0.0).unwrap_or(f64::NAN),
                q1: quantile(v, 0.25).unwrap_or(f64::NAN),
                median: quantile(v, 0.5).unwrap_or(f64::NAN),
                q3: quantile(v, 0.75).unwrap_or(f64::NAN),
                max: quantile(v, 1.0).unwrap_or(f64::NAN),
            });
        }
    }
    rows
}

/// Write the summary of `records` as `summary.csv` in `dir`.
pub fn write_summaries(dir: &Path, records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = summarize_results(records);
    let path = dir.join("summary.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
