//! Drives the `cae-anomaly` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "image_size = 16\npreset = bae2\ntrain_count = 20\nval_count = 12\ntest_ok_count = 6\ntest_nok_count = 10\n\
epochs = 2\nbatch_size = 5\npca_dims = 4\ntsne_perplexity = 5\ntsne_iterations = 300\nsvm_nu = 0.2\n";

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cae-anomaly")).current_dir(dir).args(["--config", "small.conf", "-q"]).args(args).output().expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}\n{}", out.status, String::from_utf8_lossy(&out.stderr));
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.conf"), SMALL).unwrap();
    dir
}

#[test]
fn stages_reproduce_run_all() {
    for mode in ["error_metrics", "pca_tsne", "raw_encoded"] {
        let dir = setup();
        let d = dir.path();
        ok(cli(d, &["--mode", mode, "--out", "whole", "run-all"]));
        ok(cli(d, &["--mode", mode, "--out", "staged", "synth"]));
        let mut stages = vec!["train", "features"];
        if mode == "pca_tsne" {
            stages.push("embed");
        }
        stages.extend(["fit-svm", "evaluate"]);
        for stage in stages {
            ok(cli(d, &["--mode", mode, "--out", "staged", stage]));
        }
        for file in ["features.csv", "scores.csv", "scatter.svg", "report.kv", "ocsvm.ocsv", "cae.caem"] {
            let a = fs::read(d.join("whole").join(file)).unwrap();
            let b = fs::read(d.join("staged").join(file)).unwrap();
            assert!(a == b, "{mode}: {file} differs");
        }
    }
}

#[test]
fn evaluate_prints_report() {
    let dir = setup();
    let out = ok(cli(dir.path(), &["run-all"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("AUC"), "{text}");
    assert!(out.stderr.is_empty(), "quiet mode wrote progress");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = setup();
    let out = cli(dir.path(), &["--set", "svm_nu=7", "config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config stage"));
    let out = cli(dir.path(), &["--set", "no_such_key=1", "config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_errors_exit_with_one() {
    let dir = setup();
    // no dataset has been synthesized
    let out = cli(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train stage"));
}

#[test]
fn config_lists_keys_and_round_trips() {
    let dir = setup();
    let keys = String::from_utf8(ok(cli(dir.path(), &["config", "--keys"])).stdout).unwrap();
    for key in ["seed", "feature_mode", "svm_nu", "tsne_perplexity", "ssim_window"] {
        assert!(keys.lines().any(|l| l.starts_with(key)), "{key} missing");
    }
    let text = ok(cli(dir.path(), &["--seed", "9", "config"])).stdout;
    fs::write(dir.path().join("echo.conf"), &text).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_cae-anomaly")).current_dir(dir.path()).args(["--config", "echo.conf", "config"]).output().unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), String::from_utf8(text).unwrap());
}
