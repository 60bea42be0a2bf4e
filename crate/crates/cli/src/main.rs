//! `incipient`: generate data, run sweeps, check the Beta model, summarize results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use incipient::data::{generate, write_csv};
use incipient::experiment::{read_results_csv, run_theory, run_to_dir, write_summaries, ExperimentConfig};
use log::{info, warn, LevelFilter};

#[derive(Debug, Parser)]
#[command(name = "incipient", version, about = "Ensemble uncertainty for incipient anomaly detection")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as CSV.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full sweep and write results.csv and results.json.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides `output` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Estimate misranking probabilities over the Beta grid.
    Theory {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate one or more results CSVs into summary.csv.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Output directory; defaults to the directory of the first input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Returns whether every combination or check succeeded.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Generate { config, out } => {
            let config = load_config(config.as_deref())?;
            config.validate()?;
            let data = generate(&config.dataset.generator, config.dataset.policy)?;
            write_csv(&out, &data)?;
            info!("wrote {} examples to {}", data.len(), out.display());
            Ok(true)
        }
        Command::Run { config, out, jobs } => {
            let config = load_config(config.as_deref())?;
            if jobs == Some(0) {
                bail!("--jobs must be at least 1");
            }
            let out = out.unwrap_or_else(|| config.output.clone());
            let summary = run_to_dir(&config, &out, jobs)?;
            println!(
                "{} records ({} ok, {} undefined, {} errors) in {}",
                summary.records,
                summary.ok,
                summary.undefined,
                summary.errors,
                out.display()
            );
            Ok(summary.succeeded())
        }
        Command::Theory { config, out } => {
            let config = load_config(config.as_deref())?;
            let out = out.unwrap_or_else(|| config.output.clone());
            let report = run_theory(&config, &out)?;
            let s = &report.summary;
            println!(
                "{} cells over {} pairs: delta ordering {}, mean <= var {}, scaling bounded {}, \
                 variance ~ 1/K {}, corollary direction {}",
                s.rows,
                s.pairs,
                s.delta_ordering,
                s.mean_le_var,
                s.scaling_bounded,
                s.variance_scales_as_inverse_k,
                s.corollary_direction
            );
            if !s.all_passed() {
                warn!("some theory checks failed; see {}", out.join("theory_summary.json").display());
            }
            Ok(s.all_passed())
        }
        Command::Report { results, out } => {
            let mut records = Vec::new();
            for path in &results {
                records.extend(read_results_csv(path).with_context(|| format!("reading {}", path.display()))?);
            }
            let out =
                out.unwrap_or_else(|| results[0].parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
            let rows = write_summaries(&out, &records)?;
            println!(
                "{} summary rows from {} records in {}",
                rows.len(),
                records.len(),
                out.join("summary.csv").display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
