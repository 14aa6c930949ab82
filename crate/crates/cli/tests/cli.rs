use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gffo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gffo")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let out = gffo(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn valid_instances_pass() {
    let dir = tempfile::tempdir().unwrap();
    let constant = generate(dir.path(), "c.json", &["--family", "constant", "--n", "2", "--s", "2", "--c", "0.7"]);
    let model = generate(dir.path(), "pm.json", &["--family", "phi-model", "--n", "2", "--s", "3", "--a", "0.5", "--b", "-0.9"]);

    assert_eq!(code(&gffo(&["validate", p(&constant)])), 0);
    assert_eq!(code(&gffo(&["check", p(&constant), "--condition", "osserman", "--samples", "16"])), 0);
    assert_eq!(
        code(&gffo(&["check", p(&constant), "--condition", "osserman", "--causal", "timelike", "--samples", "16"])),
        0
    );
    assert_eq!(code(&gffo(&["check", p(&model), "--condition", "phi-null-osserman", "--samples", "16"])), 0);
    assert_eq!(code(&gffo(&["verify-theorem", p(&model), "--samples", "16"])), 0);
}

#[test]
fn generic_tensor_fails_condition() {
    let dir = tempfile::tempdir().unwrap();
    let random = generate(dir.path(), "r.json", &["--family", "random", "--n", "2", "--s", "2", "--seed", "3"]);
    let out = gffo(&["check", p(&random), "--condition", "phi-null-osserman", "--samples", "16", "--json"]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(false));
    // the O'Neill identities hold for any tensor
    assert_eq!(code(&gffo(&["remarks", p(&random), "--kind", "sasaki-base", "--samples", "8"])), 0);
}

#[test]
fn broken_structure_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate(dir.path(), "c.json", &["--family", "constant", "--n", "1", "--s", "2"]);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let dim = doc["structure"]["dim"].as_u64().unwrap() as usize;
    doc["structure"]["phi"][2 * dim] = Value::from(2.0);
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

    let out = gffo(&["validate", p(&path)]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&gffo(&["check", p(&path), "--condition", "osserman"])), 2);
}

#[test]
fn unreadable_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"structure\": [1, 2,").unwrap();
    assert_eq!(code(&gffo(&["validate", p(&bad)])), 3);
    assert_eq!(code(&gffo(&["validate", p(&dir.path().join("missing.json"))])), 3);
}

#[test]
fn tampered_sigma_trips_the_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(dir.path(), "pm.json", &["--family", "phi-model", "--n", "2", "--s", "3"]);
    let out = gffo(&["verify-theorem", p(&model), "--samples", "8", "--tamper-sigma", "0.5"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn spectrum_of_a_space_form() {
    let dir = tempfile::tempdir().unwrap();
    let constant = generate(dir.path(), "c.json", &["--family", "constant", "--n", "1", "--s", "1", "--c", "2"]);
    let out = gffo(&["spectrum", p(&constant), "--vector", "1,0,0", "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let groups = report["spectrum"]["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0]["multiplicity"], 2);
    assert!((groups[0]["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}
