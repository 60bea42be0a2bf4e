//! Sweep harness: configuration, the train / calibrate / evaluate pipeline
//! for every combination, result tables and their summaries.

mod config;
mod report;
mod results;
mod run;

pub use config::{DataSource, DatasetConfig, ExperimentConfig, HistogramConfig, MeanThreshold, Method};
pub use report::{median, quantile, summarize_results, write_summaries, SummaryRow};
pub use results::{
    read_records, read_results_csv, write_records, write_results_csv, write_results_json, ResultRecord, Status,
};
pub use run::{
    load_dataset, prediction_histograms, prepare, run_experiment, run_experiment_on, run_theory, run_to_dir,
    train_ensemble, HistogramRecord, Prepared, RunSummary,
};
