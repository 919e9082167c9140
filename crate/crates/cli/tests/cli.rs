use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hydra_cli::exit;

const BIN: &str = env!("CARGO_BIN_EXE_hydra");

const SMALL: &str = r#"
[synth]
catchments = 3
years = 8
seed = 1

[model]
architecture = "hydra"

[model.hyperparameters]
hidden_size = 5
num_layers = 1
learning_rate = 0.01
dropout = 0.0

[model.hyperparameters.head]
hidden_size = 4
num_layers = 1

[train]
window = 6
max_epochs = 2
patience = 2
"#;

fn hydra(workdir: &Path, args: &[&str]) -> Output {
    fs::write(workdir.join("run.toml"), SMALL).unwrap();
    Command::new(BIN).arg("--workdir").arg(workdir).args(["--config", "run.toml"]).args(args).output().unwrap()
}

fn succeeds(workdir: &Path, args: &[&str]) -> Output {
    let out = hydra(workdir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn synth_writes_one_csv_per_catchment_and_replays() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    succeeds(a.path(), &["synth"]);
    succeeds(b.path(), &["synth"]);
    let names = csv_names(&a.path().join("data"));
    assert_eq!(names, ["basin_00.csv", "basin_01.csv", "basin_02.csv", "static.csv"]);
    for n in &names {
        assert_eq!(fs::read(a.path().join("data").join(n)).unwrap(), fs::read(b.path().join("data").join(n)).unwrap());
    }
    let data = hydra_core::data::read_dataset_dir(&a.path().join("data")).unwrap();
    assert_eq!(data.len(), 3);
    assert!(data.iter().all(|d| d.years().len() == 8));
}

#[test]
fn crossval_reports_every_fold() {
    let w = tempfile::tempdir().unwrap();
    succeeds(w.path(), &["synth"]);
    succeeds(w.path(), &["crossval", "--folds", "4", "--out", "runs/cv"]);
    let run = w.path().join("runs/cv");
    assert!(run.join("folds/fold_3/checkpoints/body.json").exists());
    for variant in ["hydra_multi_catchment_head", "hydra_single_catchment_heads"] {
        let text = fs::read_to_string(run.join("reports").join(format!("{variant}.json"))).unwrap();
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(report["folds"].as_array().unwrap().len(), 4);
        assert_eq!(report["aggregate"]["n_basin_years"], 12);
    }
}

#[test]
fn report_compares_two_architectures() {
    let w = tempfile::tempdir().unwrap();
    succeeds(w.path(), &["synth"]);
    succeeds(w.path(), &["train", "--out", "runs/hydra"]);
    succeeds(w.path(), &["train", "--architecture", "multi_catchment_no_q", "--out", "runs/mc"]);
    succeeds(w.path(), &["report", "--runs", "runs/hydra", "runs/mc", "--out", "report"]);
    let table = fs::read_to_string(w.path().join("report/comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{table}");
    assert!(rows.iter().any(|r| r.contains("multi_catchment_no_q")));

    let cdf = fs::read_to_string(w.path().join("report/cdf/mc__multi_catchment_no_q.csv")).unwrap();
    let scores: Vec<f64> = cdf.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!scores.is_empty());
    assert!(scores.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn missing_artifacts_exit_with_a_data_error() {
    let w = tempfile::tempdir().unwrap();
    fs::create_dir_all(w.path().join("runs/empty")).unwrap();
    let out = hydra(w.path(), &["report", "--runs", "runs/empty"]);
    assert_eq!(out.status.code(), Some(exit::DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing run artifacts"));
}

#[test]
fn bad_config_exits_with_a_config_error() {
    let w = tempfile::tempdir().unwrap();
    let out = hydra(w.path(), &["train", "--window", "0"]);
    assert_eq!(out.status.code(), Some(exit::CONFIG));
}
