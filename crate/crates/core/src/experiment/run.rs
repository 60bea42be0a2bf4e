use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, HistogramConfig, MeanThreshold, Method};
use super::results::{write_results_csv, write_results_json, ResultRecord, Status};
use crate::data::{generate, holdout, ingest_csv, partition, Dataset, SplitSpec, Standardizer, MAX_SEVERITY};
use crate::decision::{calibrate_tau, calibrate_u_threshold, classify, select_uncertain_negatives};
use crate::ensemble::{combine, Combination, EnsembleModel, PredictionMatrix};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::learners::{LearnerSpec, Samples};
use crate::rng::{derive_rng, derive_seed};
use crate::theory::{verify_theorem_grid, BetaParams, PredictionHistogram, TheoryReport};
use crate::uncertainty::{Metric, UncertaintyScores};

/// Load or generate the dataset a config describes.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let ds = &config.dataset;
    match ds.source {
        DataSource::Synthetic => generate(&ds.generator, ds.policy),
        DataSource::Csv => {
            let path = ds.path.as_ref().ok_or_else(|| Error::Config("dataset.path is not set".into()))?;
            ingest_csv(path, &ds.csv_schema())
        }
    }
}

/// Standardized fit / calibration / test sets for one `(seed, rho)`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub fit: Dataset,
    pub calibration: Dataset,
    pub test: Dataset,
}

/// Partition, hold out the calibration part, and standardize with
/// statistics of the whole development set.
pub fn prepare(data: &Dataset, config: &ExperimentConfig, seed: u64, rho: f64) -> Result<Prepared> {
    let split = SplitSpec { rho, dev_fraction: config.dev_fraction, seed: derive_seed(seed, "partition", 0) };
    let parts = partition(data, &split)?;
    let scaler = Standardizer::fit(&parts.dev)?;
    let (fit, calibration) = holdout(&parts.dev, config.calibration_fraction, derive_seed(seed, "holdout", 0))?;
    Ok(Prepared {
        fit: scaler.transform(&fit),
        calibration: scaler.transform(&calibration),
        test: scaler.transform(&parts.test),
    })
}

/// Train the largest ensemble of the sweep; smaller sizes use its leading members.
pub fn train_ensemble(prepared: &Prepared, config: &ExperimentConfig, seed: u64, k: usize) -> Result<EnsembleModel> {
    let samples = Samples::from_dataset(&prepared.fit);
    let model = EnsembleModel::train_bagging(
        &samples,
        &config.learner,
        k,
        config.max_samples,
        derive_seed(seed, "ensemble", 0),
    )?;
    Ok(model.with_combination(config.combination))
}

fn learner_label(spec: &LearnerSpec) -> String {
    match spec {
        LearnerSpec::Tree(p) => format!("max_depth={};min_samples_split={}", p.max_depth, p.min_samples_split),
        LearnerSpec::Net(p) => format!(
            "hidden_width={};learning_rate={};epochs={};batch_size={};init_scale={}",
            p.hidden_width, p.learning_rate, p.epochs, p.batch_size, p.init_scale
        ),
    }
}

fn combination_label(c: Combination) -> String {
    match c {
        Combination::Soft => "soft".into(),
        Combination::Hard { threshold } => format!("hard@{threshold}"),
    }
}

struct Coords {
    seed: u64,
    rho: f64,
    k: usize,
    q: f64,
    theta: f64,
    method: Method,
}

fn blank_record(config: &ExperimentConfig, c: &Coords) -> ResultRecord {
    ResultRecord {
        seed: c.seed,
        rho: c.rho,
        k: c.k,
        q: c.q,
        theta: c.theta,
        metric: c.method.to_string(),
        family: config.learner.family().into(),
        learner: learner_label(&config.learner),
        max_samples: config.max_samples,
        combination: combination_label(config.combination),
        mean_threshold: match config.mean_threshold {
            MeanThreshold::Calibrated => "calibrated".into(),
            MeanThreshold::Half => "half".into(),
        },
        policy: format!("{:?}", config.dataset.policy).to_lowercase(),
        dev_fraction: config.dev_fraction,
        calibration_fraction: config.calibration_fraction,
        status: Status::Error,
        message: String::new(),
        n_fit: None,
        n_calibration: None,
        n_test: None,
        tau: None,
        u_threshold: None,
        u_threshold_aux: None,
        fpr: None,
        fnr_incipient: None,
        fnr_non_incipient: None,
        fn_precision: None,
        total_fn: None,
        uncertain_negative_count: None,
        uncertain_fn: None,
        certain_fn: None,
        detect_sl0: None,
        detect_sl1: None,
        detect_sl2: None,
        detect_sl3: None,
        detect_sl4: None,
    }
}

/// Scores of one ensemble size on the calibration and test sets.
struct Scored<'a> {
    prepared: &'a Prepared,
    cal_matrix: PredictionMatrix,
    test_matrix: PredictionMatrix,
    cal_scores: Vec<f64>,
    test_scores: Vec<f64>,
}

fn uncertainty(metric: Metric, m: &PredictionMatrix, scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    Ok(UncertaintyScores::compute(metric, m, scores, tau)?.scores)
}

/// Threshold from the calibration negatives, then the flagged test negatives.
fn flag(
    s: &Scored<'_>,
    metric: Metric,
    mean_tau: f64,
    theta: f64,
    cal_pred: &[bool],
    test_pred: &[bool],
) -> Result<(f64, Vec<usize>)> {
    let cal_u = uncertainty(metric, &s.cal_matrix, &s.cal_scores, mean_tau)?;
    let test_u = uncertainty(metric, &s.test_matrix, &s.test_scores, mean_tau)?;
    let negatives: Vec<f64> = cal_u.iter().zip(cal_pred).filter(|(_, p)| !**p).map(|(u, _)| *u).collect();
    let u_threshold = calibrate_u_threshold(&negatives, theta)?;
    Ok((u_threshold, select_uncertain_negatives(test_pred, &test_u, u_threshold)))
}

fn evaluate_q(config: &ExperimentConfig, s: &Scored<'_>, base: &Coords) -> Vec<ResultRecord> {
    let cal = &s.prepared.calibration;
    let test = &s.prepared.test;
    let mut out = Vec::with_capacity(config.theta.len() * config.metrics.len());

    let cal_labels = cal.labels();
    let negatives: Vec<f64> = s.cal_scores.iter().zip(&cal_labels).filter(|(_, z)| !**z).map(|(y, _)| *y).collect();
    let tau = calibrate_tau(&negatives, base.q);
    let test_labels = test.labels();
    let severities = test.severities();

    for &theta in &config.theta {
        for &method in &config.metrics {
            let coords = Coords { theta, method, ..*base };
            let mut rec = blank_record(config, &coords);
            rec.n_fit = Some(s.prepared.fit.len());
            rec.n_calibration = Some(cal.len());
            rec.n_test = Some(test.len());
            let tau = match &tau {
                Ok(t) => *t,
                Err(e) => {
                    rec.fail(Status::Error, e.to_string());
                    out.push(rec);
                    continue;
                }
            };
            rec.tau = Some(tau);
            if base.k < 2 && method.needs_disagreement() {
                rec.fail(Status::Undefined, format!("{method} needs at least two members"));
                out.push(rec);
                continue;
            }
            let mean_tau = match config.mean_threshold {
                MeanThreshold::Calibrated => tau,
                MeanThreshold::Half => 0.5,
            };
            let cal_pred = classify(&s.cal_scores, tau);
            let test_pred = classify(&s.test_scores, tau);
            let flagged = match method {
                Method::Single(m) => flag(s, m, mean_tau, theta, &cal_pred, &test_pred).map(|(u, set)| {
                    rec.u_threshold = Some(u);
                    set
                }),
                Method::MeanVar => {
                    flag(s, Metric::Mean, mean_tau, theta, &cal_pred, &test_pred).and_then(|(um, by_mean)| {
                        let (uv, by_var) = flag(s, Metric::Var, mean_tau, theta, &cal_pred, &test_pred)?;
                        rec.u_threshold = Some(um);
                        rec.u_threshold_aux = Some(uv);
                        let a: BTreeSet<usize> = by_mean.into_iter().collect();
                        let b: BTreeSet<usize> = by_var.into_iter().collect();
                        Ok(crate::uncertainty::union_mean_var(&a, &b).into_iter().collect())
                    })
                }
            };
            match flagged {
                Ok(set) => {
                    let report = MetricsReport::evaluate(&severities, &test_labels, &test_pred, &set, test.policy);
                    rec.fill(&report);
                }
                Err(e) => rec.fail(Status::Error, e.to_string()),
            }
            out.push(rec);
        }
    }
    out
}

fn failed_unit(config: &ExperimentConfig, seed: u64, rho: f64, err: &Error) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for &k in &config.k {
        for &q in &config.q {
            for &theta in &config.theta {
                for &method in &config.metrics {
                    let mut r = blank_record(config, &Coords { seed, rho, k, q, theta, method });
                    r.fail(Status::Error, err.to_string());
                    out.push(r);
                }
            }
        }
    }
    out
}

/// All records for one `(seed, rho)` pair, ordered by `k`, `q`, `theta`, metric.
fn run_unit(data: &Dataset, config: &ExperimentConfig, seed: u64, rho: f64) -> Vec<ResultRecord> {
    let trained = prepare(data, config, seed, rho).and_then(|p| {
        let model = train_ensemble(&p, config, seed, config.max_k())?;
        let cal = model.predict_matrix(&p.calibration.features())?;
        let test = model.predict_matrix(&p.test.features())?;
        Ok((p, cal, test))
    });
    let (prepared, cal, test) = match trained {
        Ok(t) => t,
        Err(e) => {
            log::warn!("seed {seed}, rho {rho}: {e}");
            return failed_unit(config, seed, rho, &e);
        }
    };

    let mut out = Vec::with_capacity(config.n_records() / (config.seeds.len() * config.rho.len()));
    for &k in &config.k {
        let cal_matrix = cal.first_members(k);
        let test_matrix = test.first_members(k);
        let scored = Scored {
            prepared: &prepared,
            cal_scores: combine(&cal_matrix, config.combination),
            test_scores: combine(&test_matrix, config.combination),
            cal_matrix,
            test_matrix,
        };
        for &q in &config.q {
            let base = Coords { seed, rho, k, q, theta: 0.0, method: Method::MeanVar };
            out.extend(evaluate_q(config, &scored, &base));
        }
    }
    out
}

/// Run every sweep combination of `config` on `data`.
///
/// `jobs` bounds the worker threads (all cores when `None`). Records come
/// back ordered by seed, `rho`, `k`, `q`, `theta` and metric, following the
/// order of the config lists; a failing combination yields an error record
/// and never affects the others.
pub fn run_experiment_on(data: &Dataset, config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let units: Vec<(u64, f64)> = config.seeds.iter().flat_map(|&s| config.rho.iter().map(move |&r| (s, r))).collect();
    let work = || -> Vec<ResultRecord> {
        units.par_iter().map(|&(seed, rho)| run_unit(data, config, seed, rho)).collect::<Vec<_>>().concat()
    };
    let records = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };
    debug_assert_eq!(records.len(), config.n_records());
    Ok(records)
}

pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let data = load_dataset(config)?;
    run_experiment_on(&data, config, jobs)
}

/// Counts of record outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub records: usize,
    pub ok: usize,
    pub undefined: usize,
    pub errors: usize,
}

impl RunSummary {
    pub fn of(records: &[ResultRecord]) -> Self {
        let count = |s: Status| records.iter().filter(|r| r.status == s).count();
        RunSummary {
            records: records.len(),
            ok: count(Status::Ok),
            undefined: count(Status::Undefined),
            errors: count(Status::Error),
        }
    }

    /// No combination failed. Undefined metric/size pairs are not failures.
    pub fn succeeded(&self) -> bool {
        self.errors == 0
    }
}

/// Run the sweep and write `results.csv` and `results.json` into `out`,
/// plus `histograms.json` when histograms are enabled.
pub fn run_to_dir(config: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let data = load_dataset(config)?;
    let records = run_experiment_on(&data, config, jobs)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_results_csv(out.join("results.csv"), &records)?;
    write_results_json(out.join("results.json"), &records)?;
    if config.histogram.enabled {
        let hist = prediction_histograms(&data, config, &config.histogram)?;
        let path = out.join("histograms.json");
        fs::write(&path, serde_json::to_string_pretty(&hist)? + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(RunSummary::of(&records))
}

/// Member predictions for one probed test example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRecord {
    /// Index into the standardized test set.
    pub test_index: usize,
    pub severity: u8,
    pub label: bool,
    pub mean: f64,
    pub variance: f64,
    pub histogram: PredictionHistogram,
}

impl HistogramRecord {
    pub fn fit(&self) -> Option<BetaParams> {
        self.histogram.fit
    }
}

/// Prediction histograms and Beta fits for probed test examples.
///
/// A pool of members is trained on bootstrap resamples, `k` of them are
/// drawn at random, and each probed example's `k` outputs are binned and
/// fitted by moments. Examples are probed per severity level.
pub fn prediction_histograms(
    data: &Dataset,
    config: &ExperimentConfig,
    h: &HistogramConfig,
) -> Result<Vec<HistogramRecord>> {
    if h.k == 0 || h.k > h.pool || h.bins == 0 {
        return Err(Error::Config("histogram needs 0 < k <= pool and bins > 0".into()));
    }
    let prepared = prepare(data, config, h.seed, h.rho)?;
    let pool = train_ensemble(&prepared, config, h.seed, h.pool)?;
    let mut rng = derive_rng(h.seed, "histogram-pool", 0);
    let mut chosen = sample(&mut rng, h.pool, h.k).into_vec();
    chosen.sort_unstable();
    let model = pool.select(&chosen);

    let mut probes = Vec::new();
    for sl in 0..=MAX_SEVERITY {
        let mut idx: Vec<usize> =
            (0..prepared.test.len()).filter(|&i| prepared.test.examples[i].severity == sl).collect();
        idx.shuffle(&mut derive_rng(h.seed, "histogram-probe", u64::from(sl)));
        idx.truncate(h.probes_per_severity);
        idx.sort_unstable();
        probes.extend(idx);
    }
    let rows: Vec<&[f64]> = probes.iter().map(|&i| prepared.test.examples[i].features.as_slice()).collect();
    let matrix = model.predict_matrix(&rows)?;
    Ok(probes
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let row = matrix.row(r);
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let variance =
                if row.len() > 1 { row.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let e = &prepared.test.examples[i];
            HistogramRecord {
                test_index: i,
                severity: e.severity,
                label: prepared.test.policy.is_positive(e.severity),
                mean,
                variance,
                histogram: PredictionHistogram::new(row, h.bins),
            }
        })
        .collect())
}

/// Run the Beta-model grid of `config.theory` and write its report into `out`.
pub fn run_theory(config: &ExperimentConfig, out: &Path) -> Result<TheoryReport> {
    let report = verify_theorem_grid(&config.theory)?;
    report.write(out)?;
    Ok(report)
}
