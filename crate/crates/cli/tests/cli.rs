use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use impute_core::data::{read_csv, read_mask_csv, CsvOptions};

fn impute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impute")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = impute(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_simulate_impute_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["make-synth", "--kind", "gaussian", "--n", "60", "--d", "3", "--seed", "4", "--out", s(&data)]);
    let sim = dir.path().join("sim");
    ok(&["simulate", "--data", s(&data), "--mechanism", "mar", "--rate", "0.3", "--seed", "4", "--out", s(&sim)]);
    let (_, mask) = read_mask_csv(sim.join("mask.csv")).unwrap();
    assert!(mask.n_missing() > 0);
    let imputed = dir.path().join("imputed.csv");
    let log = dir.path().join("log.json");
    ok(&[
        "impute", "--data", s(&sim.join("masked.csv")), "--method", "hyperimpute", "--strategy", "naive",
        "--out", s(&imputed), "--log", s(&log),
    ]);
    let masked = read_csv(sim.join("masked.csv"), &CsvOptions::default()).unwrap();
    let filled = read_csv(&imputed, &CsvOptions::default()).unwrap();
    assert_eq!(filled.mask().n_missing(), 0);
    for i in 0..masked.n_rows() {
        for j in 0..masked.n_cols() {
            if let Some(v) = masked.get(i, j) {
                assert_eq!(filled.get(i, j), Some(v));
            }
        }
    }
    assert!(fs::read_to_string(&log).unwrap().contains("\"entries\""));
}

#[test]
fn benchmark_outputs_feed_the_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    ok(&[
        "benchmark", "--synth", "linear", "--synth-n", "80", "--mechanism", "mcar", "--rate", "0.2", "--seeds", "2",
        "--methods", "hyperimpute,mean", "--strategy", "naive", "--out", s(&out),
    ]);
    for f in ["report.json", "summary.csv", "timings.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let sel = ok(&["selection-report", s(&out)]);
    assert!(String::from_utf8_lossy(&sel.stdout).lines().count() >= 2);
    let conv = ok(&["convergence-report", s(&out), "--method", "hyperimpute"]);
    let text = String::from_utf8_lossy(&conv.stdout);
    assert!(text.starts_with("run,iter,objective"), "{text}");
}

#[test]
fn exit_codes_separate_spec_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["make-synth", "--n", "20", "--d", "2", "--out", s(&data)]);
    let bad_rate = impute(&["simulate", "--data", s(&data), "--rate", "1.5", "--out", s(dir.path())]);
    assert_eq!(bad_rate.status.code(), Some(2));
    let missing = impute(&["simulate", "--data", s(&dir.path().join("nope.csv")), "--out", s(dir.path())]);
    assert_eq!(missing.status.code(), Some(3));
    let bad_method = impute(&["impute", "--data", s(&data), "--method", "ice_fixed(nope)", "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(bad_method.status.code(), Some(2));
}
