use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seeds = [0, 1]
rho = [0.0, 0.2, 1.0]
q = [0.05, 0.1]
theta = [0.1]
k = [1, 5]
metrics = ["mean", "var"]

[dataset.generator]
normal_count = 600
cell_count = 30

[learner]
family = "tree"
max_depth = 5
min_samples_split = 2

[theory]
concentrations = [10.0]
means = [0.2, 0.4]
k_values = [5, 25]
trials = 500
"#;

fn incipient(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incipient")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_one_row_per_combination_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));

    let out = incipient(&["run", "--config", &config, "--out", arg(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // VAR is undefined for single learners; that is not a failure.
    assert!(stdout.contains("48 records (36 ok, 12 undefined, 0 errors)"), "{stdout}");

    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 49);
    assert!(csv.starts_with("seed,rho,k,q,theta,metric,"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(a.join("results.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().map(Vec::len), Some(48));

    let out = incipient(&["run", "--config", &config, "--out", arg(&b), "--jobs", "2"]);
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn generated_csv_feeds_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let data = dir.path().join("data.csv");
    let out = incipient(&["generate", "--config", &config, "--out", arg(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(&data).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("f0,f1,"));
    assert!(header.ends_with(",severity,fault_id"));
    // 600 normal rows plus 30 per fault type and severity.
    assert_eq!(text.lines().count(), 1 + 600 + 6 * 4 * 30);

    let csv_config = format!("{SMALL}\n[dataset]\nsource = \"csv\"\npath = \"data.csv\"\n");
    let config = write_config(dir.path(), &csv_config);
    let results = dir.path().join("from-csv");
    let out = incipient(&["run", "--config", &config, "--out", arg(&results)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(results.join("results.csv")).unwrap().lines().count(), 49);
}

#[test]
fn report_summarizes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let runs = dir.path().join("runs");
    assert!(incipient(&["run", "--config", &config, "--out", arg(&runs)]).status.success());

    let out = incipient(&["report", arg(&runs.join("results.csv"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(runs.join("summary.csv")).unwrap();
    assert!(summary.starts_with("table,family,k,q,rho,metric,theta,n,min,q1,median,q3,max"));
    assert!(summary.lines().any(|l| l.starts_with("fnr_incipient,tree,5,")));
}

#[test]
fn theory_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("theory");
    let out = incipient(&["theory", "--config", &config, "--out", arg(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("theory_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["delta_ordering"], true);
    // One pair (2 < 4) at two ensemble sizes.
    assert_eq!(fs::read_to_string(out_dir.join("theory.csv")).unwrap().lines().count(), 3);
}

#[test]
fn zero_trials_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("trials = 500", "trials = 0"));
    let out = incipient(&["theory", "--config", &config, "--out", arg(&dir.path().join("t"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["q = [1.0]", "rho = []", "colour = \"blue\"", "k = [0]"] {
        let config = write_config(dir.path(), bad);
        let out = incipient(&["run", "--config", &config, "--out", arg(&dir.path().join("r"))]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    assert!(!dir.path().join("r").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = incipient::experiment::ExperimentConfig::load(root.join("default.toml")).unwrap();
    assert_eq!(default, incipient::experiment::ExperimentConfig::default());
    let smoke = incipient::experiment::ExperimentConfig::load(root.join("smoke.toml")).unwrap();
    assert_eq!(smoke.n_records(), 48);
}

#[test]
fn failed_combinations_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("q = [0.05, 0.1]", "q = [0.001, 0.1]"));
    let out_dir = dir.path().join("r");
    let out = incipient(&["run", "--config", &config, "--out", arg(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    // Every record is still written.
    assert_eq!(fs::read_to_string(out_dir.join("results.csv")).unwrap().lines().count(), 49);
}
