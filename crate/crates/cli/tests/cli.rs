//! Drives the `poolbench` binary through synth, run and report.

use std::path::Path;
use std::process::{Command, Output};

use poolbench_core::deep::TransformerConfig;
use poolbench_core::runner::{AGGREGATE_CSV_FILE, AGGREGATE_MD_FILE, MANIFEST_FILE, POOL_REPORTS_FILE};
use poolbench_core::RunConfig;

fn poolbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poolbench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("POOLBENCH_ENDPOINT")
        .output()
        .unwrap()
}

fn write_fast_config(path: &Path) {
    let mut c = RunConfig::default();
    c.workers = 1;
    c.params.random_forest.n_trees = 4;
    c.params.xgboost.n_rounds = 10;
    c.params.lstm.network.hidden = 4;
    c.params.lstm.training.max_epochs = 1;
    c.params.transformer.network = TransformerConfig {
        d_model: 8,
        heads: 2,
        blocks: 1,
        d_ff: 8,
        positional_encoding: true,
    };
    c.params.transformer.training.max_epochs = 1;
    c.params.qnn.max_epochs = 1;
    c.params.qsvm_qnn.max_support = 16;
    std::fs::write(path, c.to_toml_string().unwrap()).unwrap();
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_run_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.toml");
    write_fast_config(&cfg);
    let (data_s, out_s, cfg_s) = (data.to_str().unwrap(), out.to_str().unwrap(), cfg.to_str().unwrap());

    let o = poolbench(&["synth", "--data", data_s, "--n-pools", "2", "--rows", "160"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read_dir(&data).unwrap().count(), 2);

    let o = poolbench(&["--config", cfg_s, "--data", data_s, "--out", out_s, "--models", "xgb,qsvm", "run"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let table = stdout(&o);
    assert!(table.starts_with("| Model | Test MAE |"), "{table}");
    assert!(table.contains("| XGBoost |") && table.contains("| QSVM-QNN |"));
    for f in [POOL_REPORTS_FILE, AGGREGATE_CSV_FILE, AGGREGATE_MD_FILE, MANIFEST_FILE] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let md = std::fs::read(out.join(AGGREGATE_MD_FILE)).unwrap();
    std::fs::remove_file(out.join(AGGREGATE_MD_FILE)).unwrap();
    let o = poolbench(&["report", "--out", out_s]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(std::fs::read(out.join(AGGREGATE_MD_FILE)).unwrap(), md);
}

#[test]
fn bad_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let m = missing.to_str().unwrap();

    let o = poolbench(&["--models", "svm", "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));

    assert_eq!(poolbench(&["--data", m, "run"]).status.code(), Some(2));
    assert_eq!(poolbench(&["report", "--out", m]).status.code(), Some(2));
    assert_eq!(poolbench(&["fetch", "--pools", "0xabc"]).status.code(), Some(2));
    assert_eq!(poolbench(&["synth", "--data", m, "--rows", "10"]).status.code(), Some(2));
}
