use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fdedim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdedim"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env("FDEDIM_THREADS", "1")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn roots_lists_the_undelayed_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(&["roots", "--a", "1", "--b", "0", "--r", "1", "--max-mode", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let rhos: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(rhos, vec![-2.0, -5.0, -10.0]);
}

#[test]
fn missing_parameter_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(&["roots", "--a", "1", "--b", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `r`"), "{}", stderr(&o));
}

#[test]
fn malformed_json_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"seed\": 1,\n  \"rde\": {\n}").unwrap();
    let o = fdedim(&["roots", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(&["bounds", "--config", &config("raw-bounds.json"), "--set", "bounds.alhpa=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bounds"), "{}", stderr(&o));
}

#[test]
fn raw_constants_give_the_hand_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(&["bounds", "--config", &config("raw-bounds.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let b = read_json(dir.path().join("bounds.json"));
    let h = b["report"]["hausdorff"].as_f64().unwrap();
    assert!((h - 1.0).abs() < 1e-12, "{b}");
}

#[test]
fn infeasible_bounds_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(
        &["bounds", "--config", &config("raw-bounds.json"), "--set", "constants.m1=1.5", "--alpha", "1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(dir.path().join("bounds.json").exists());
}

#[test]
fn rde_constants_feed_the_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(
        &[
            "bounds", "--a", "1", "--b", "0.1", "--r", "1", "--num-modes", "4", "--kappa", "0.1", "--source", "rde",
            "--trials", "40", "--t0", "4",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let b = read_json(dir.path().join("bounds.json"));
    let h = b["report"]["hausdorff"].as_f64().unwrap();
    assert!(h > 0.0 && h < 1.0, "{b}");
}

#[test]
fn cover_check_passes_on_the_sample_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdedim(&["cover-check", "--config", &config("cover.json")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(dir.path().join("cover.json"))["report"]["passed"], Value::Bool(true));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fdedim"))
        .args(["roots", "--a", "1", "--b", "0", "--r", "1", "--output-dir"])
        .arg(dir.path())
        .env("FDEDIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
