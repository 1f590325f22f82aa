use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fracmass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracmass")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).to_str().unwrap().to_owned()
}

fn json_stdout(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn mass_writes_energy_file_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("energy.json");
    let o = fracmass(&["mass", &fixture("unit_segment.json"), "--s", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("config: ")));
    assert!(text.contains("Ms = 2.666667"));
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["config"]["s"], 0.5);
    assert!((v["result"]["value"].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn json_mode_prints_config_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let v = json_stdout(&fracmass(&[
        "--json",
        "mass",
        &fixture("circle_256.json"),
        "--s",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(v["config"].is_object());
    assert!(v["result"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{not json");
    assert_eq!(fracmass(&["mass", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(fracmass(&["mass", &fixture("unit_segment.json"), "--s", "1.5"]).status.code(), Some(2));
    assert_eq!(fracmass(&["mass", "--bogus"]).status.code(), Some(2));
    assert_eq!(fracmass(&["asymptotic", &fixture("circle_256.json"), "--s-list", ""]).status.code(), Some(2));
    let o = fracmass(&["variation-check", &fixture("circle_256.json")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_finite_results_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let huge = write(
        dir.path(),
        "huge.json",
        r#"{"dim": 2, "curves": [{"closed": false, "vertices": [[0,0],[1e300,1e300],[-1e300,1e300]]}]}"#,
    );
    let out = dir.path().join("e.json");
    let o = fracmass(&["mass", huge.to_str().unwrap(), "--s", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn approximate_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "missing.conf", "eps = 0.1\n");
    let o = fracmass(&["approximate", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing field preset"));
    let unknown = write(dir.path(), "unknown.conf", "field = curl_bump_2d\ncolour = red\n");
    let o = fracmass(&["approximate", unknown.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_field_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&fracmass(&[
        "--json",
        "approximate",
        &fixture("zero.conf"),
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let level = &v["result"]["levels"][0];
    assert_eq!(level["segments"], 0);
    assert_eq!(level["loops"], 0);
    let loops: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("loops_0.json")).unwrap()).unwrap();
    assert_eq!(loops["curves"].as_array().unwrap().len(), 0);
    assert!(dir.path().join("diagnostics.csv").exists());
}

#[test]
fn variation_check_on_open_arc() {
    let v = json_stdout(&fracmass(&["--json", "variation-check", &fixture("arc.json"), "--count", "3"]));
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 3);
    assert!(v["result"]["max_rel_err"].as_f64().unwrap() < 1e-3);
}

#[test]
fn flow_writes_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracmass(&["flow", &fixture("circle_256.json"), "--steps", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("flow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("step_0002.json").exists());
}
