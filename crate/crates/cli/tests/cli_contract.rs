//! Command-line contract: exit codes, error lines, CSV format and
//! determinism.

use std::path::Path;
use std::process::Command;

use wbopt_cli::config::{ExperimentConfig, ExperimentKind};
use wbopt_cli::report::{Cell, Table};
use wbopt_cli::{run_config, run_with_threads};

fn wbopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wbopt"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_CASE2: &str = r#"{
  "experiment": "case2_unfold",
  "seed": 3,
  "output_path": "OUT",
  "params": {"layers": 2, "train_channels": 4, "test_channels": 4, "max_evals": 20}
}"#;

#[test]
fn unknown_key_fails_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "horizon_sweep", "foo": 1}"#);
    let out = wbopt()
        .args(["horizon", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("unknown key: foo"), "{err}");
    let parsed: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(parsed["error"], "config");
}

#[test]
fn module_failure_names_the_module() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"experiment": "horizon_sweep", "params": {"mu": 0.0}}"#,
    );
    let out = wbopt()
        .args(["horizon", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let parsed: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    assert_eq!(parsed["error"], "horizonopt");
}

#[test]
fn mismatched_subcommand_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment": "bp_run"}"#);
    let out = wbopt()
        .args(["horizon", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn case2_header_and_rerun_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_CASE2.replace("OUT", &dir.path().join("a").display().to_string());
    let cfg = write_config(dir.path(), &text);
    let first = wbopt()
        .args(["case2-unfold", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let csv_a = std::fs::read(dir.path().join("a/case2_unfold.csv")).unwrap();
    let second = wbopt()
        .args(["case2-unfold", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("b"))
        .args(["--threads", "3"])
        .output()
        .unwrap();
    assert!(second.status.success());
    let csv_b = std::fs::read(dir.path().join("b/case2_unfold.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "seed,tau_csi,scheme,layers,mean_min_se,std_min_se,mean_total_se,num_channels"
    );
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 3 * 3);

    // the manifest echo alone reproduces the run
    let manifest: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("a/case2_unfold.manifest.json")).unwrap(),
    )
    .unwrap();
    let mut echo = ExperimentConfig::from_json(&manifest["config"].to_string()).unwrap();
    echo.output_path = dir.path().join("c");
    assert_eq!(run_config(&echo).unwrap().csv_bytes, text.as_bytes());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = wbopt()
            .args(["redunet", "--seed", seed, "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.path().join(sub).join("redunet_demo.csv")).unwrap()
    };
    assert_ne!(run("1", "x"), run("2", "y"));
}

#[test]
fn floats_round_trip_through_csv() {
    let values = [
        0.1,
        1.0 / 3.0,
        -2.5e-300,
        6.02214076e23,
        f64::MIN_POSITIVE,
        1.0 - f64::EPSILON,
    ];
    let mut t = Table::new(&["v"]);
    for &v in &values {
        t.push(vec![Cell::Float(v)]);
    }
    let bytes = t.to_csv_bytes().unwrap();
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let back: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[0].parse().unwrap())
        .collect();
    assert_eq!(back.len(), values.len());
    for (a, b) in values.iter().zip(&back) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn every_experiment_runs_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ExperimentKind::ALL {
        if kind == ExperimentKind::Case2Unfold {
            continue;
        }
        let mut cfg = ExperimentConfig::default_for(kind);
        cfg.output_path = dir.path().to_path_buf();
        let out = run_with_threads(&cfg, 2).unwrap();
        assert!(out.csv_path.exists() && out.manifest_path.exists());
        let text = std::fs::read_to_string(&out.csv_path).unwrap();
        assert!(text.lines().count() > 1, "{}", kind.name());
    }
}
