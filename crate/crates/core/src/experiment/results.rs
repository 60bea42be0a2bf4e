use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricsReport;

/// Outcome of one sweep combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// The metric has no value for this ensemble size (a disagreement metric
    /// with `K = 1`).
    Undefined,
    Error,
}

/// One row of the results table: the sweep coordinates, the fixed settings
/// they ran under, and the test-set metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub seed: u64,
    pub rho: f64,
    pub k: usize,
    pub q: f64,
    pub theta: f64,
    pub metric: String,
    pub family: String,
    pub learner: String,
    pub max_samples: f64,
    pub combination: String,
    pub mean_threshold: String,
    pub policy: String,
    pub dev_fraction: f64,
    pub calibration_fraction: f64,
    pub status: Status,
    pub message: String,
    pub n_fit: Option<usize>,
    pub n_calibration: Option<usize>,
    pub n_test: Option<usize>,
    pub tau: Option<f64>,
    pub u_threshold: Option<f64>,
    /// Second threshold of a union method (the `VAR` half of `mean+var`).
    pub u_threshold_aux: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr_incipient: Option<f64>,
    pub fnr_non_incipient: Option<f64>,
    pub fn_precision: Option<f64>,
    pub total_fn: Option<usize>,
    pub uncertain_negative_count: Option<usize>,
    pub uncertain_fn: Option<usize>,
    pub certain_fn: Option<usize>,
    pub detect_sl0: Option<f64>,
    pub detect_sl1: Option<f64>,
    pub detect_sl2: Option<f64>,
    pub detect_sl3: Option<f64>,
    pub detect_sl4: Option<f64>,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Copy the test metrics into the record and mark it successful.
    pub fn fill(&mut self, report: &MetricsReport) {
        self.status = Status::Ok;
        self.fpr = report.fpr;
        self.fnr_incipient = report.fnr_incipient;
        self.fnr_non_incipient = report.fnr_non_incipient;
        self.fn_precision = report.fn_precision;
        self.total_fn = Some(report.total_fn);
        self.uncertain_negative_count = Some(report.uncertain_negative_count);
        self.uncertain_fn = Some(report.uncertain_fn);
        self.certain_fn = Some(report.certain_fn);
        [self.detect_sl0, self.detect_sl1, self.detect_sl2, self.detect_sl3, self.detect_sl4] = report.detect_rate;
    }

    pub fn fail(&mut self, status: Status, message: impl Into<String>) {
        self.status = status;
        self.message = message.into();
    }
}

pub fn write_records<W: Write>(writer: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<results writer>", e))?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRecord>, _>>()?)
}

/// Write `records` as CSV to `path`.
pub fn write_results_csv(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
}

/// Write `records` as a JSON array to `path`.
pub fn write_results_json(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(records)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(file)
}

#[cfg(test)]
pub(crate) fn sample_record() -> ResultRecord {
    ResultRecord {
        seed: 3,
        rho: 0.2,
        k: 25,
        q: 0.05,
        theta: 0.1,
        metric: "mean".into(),
        family: "tree".into(),
        learner: "max_depth=10;min_samples_split=2".into(),
        max_samples: 0.8,
        combination: "soft".into(),
        mean_threshold: "calibrated".into(),
        policy: "chiller".into(),
        dev_fraction: 0.5,
        calibration_fraction: 0.3,
        status: Status::Ok,
        message: String::new(),
        n_fit: Some(100),
        n_calibration: Some(40),
        n_test: Some(140),
        tau: Some(0.1 + 0.2),
        u_threshold: Some(0.731),
        u_threshold_aux: None,
        fpr: Some(0.05),
        fnr_incipient: Some(1.0 / 3.0),
        fnr_non_incipient: Some(0.0),
        fn_precision: None,
        total_fn: Some(7),
        uncertain_negative_count: Some(0),
        uncertain_fn: Some(0),
        certain_fn: Some(7),
        detect_sl0: Some(0.05),
        detect_sl1: Some(0.5),
        detect_sl2: None,
        detect_sl3: Some(1.0),
        detect_sl4: Some(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut b = sample_record();
        b.fail(Status::Error, "row 3: bad, \"quoted\" value");
        b.fpr = None;
        let records = vec![sample_record(), b];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("seed,rho,k,q,theta,metric,family,"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn files_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![sample_record(); 48];
        write_results_csv(&path, &records).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 49);
        assert_eq!(read_results_csv(&path).unwrap(), records);
        write_results_json(dir.path().join("r.json"), &records).unwrap();

        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(write_results_csv(&bad, &records), Err(Error::Io { .. })));
    }
}
