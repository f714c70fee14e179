use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn glsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glsim")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn digests(manifest: &Value) -> Vec<(String, String)> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["file"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn sample_with_minimal_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(&["sample", "--domain", "rect:6x6", "--samples", "10", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "sample,time,h_centre,mean_h,gradient_energy");
    assert_eq!(csv.lines().count(), 11);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "sample");
    assert_eq!(m["resolved"]["potential"], "cosine");
}

#[test]
fn unstable_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(&["sample", "--potential", "cosine", "--dt", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).expect("structured error on stderr");
    assert!(err["error"].as_str().unwrap().contains("stability cap"), "{err}");
    assert!(dir.path().join("error.json").exists());
    assert!(!dir.path().join("samples.csv").exists());
}

#[test]
fn malformed_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(&["dgff", "--boundary", "sine:1"], dir.path());
    assert!(!out.status.success());
    let out = glsim(&["dgff", "--domain", "hexagon:3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_and_both_layers_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "dgff", "domain": "rect:5x5", "samples": 100, "seed": 3}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = glsim(&["dgff", "--config", cfg.to_str().unwrap(), "--samples", "60"], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["from_config_file"]["samples"], 100);
    assert_eq!(m["from_flags"]["samples"], 60);
    assert_eq!(m["resolved"]["samples"], 60);
    assert_eq!(m["resolved"]["seed"], 3);
    assert_eq!(m["resolved"]["domain"], "rect:5x5");
    let rows = std::fs::read_to_string(out_dir.join("samples.csv")).unwrap().lines().count();
    assert_eq!(rows, 61);
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "clt", "n": 8}"#).unwrap();
    let out = glsim(&["dgff", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = glsim(&["dgff", "--domain", "rect:9x9", "--seed", "7"], d);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(digests(&ma), digests(&mb));
    assert_eq!(std::fs::read(a.join("samples.csv")).unwrap(), std::fs::read(b.join("samples.csv")).unwrap());
    let out = glsim(&["dgff", "--domain", "rect:9x9", "--seed", "8"], &dir.path().join("c"));
    assert!(out.status.success());
    assert_ne!(digests(&ma), digests(&json(&dir.path().join("c/manifest.json"))));
}

#[test]
fn quadratic_clt_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(
        &[
            "clt",
            "--potential",
            "quadratic",
            "--n",
            "8",
            "--samples",
            "500",
            "--sampler",
            "exact-gaussian",
            "--seed",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["passed"], true);
    assert_eq!(s["report"]["beta_source"], "quadratic");
    let header = std::fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    assert!(header.starts_with("sample,xi_sin1x_sin1y,xi_sin2x_sin1y\n"));
}

#[test]
fn coupling_with_equal_boundaries_never_exceeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(
        &["coupling", "--sizes", "8", "--replicas", "3", "--boundary", "sine:1:1", "--boundary-tilde", "sine:1:1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["report"]["sizes"][0]["exceedance"], 0.0);
}

#[test]
fn failing_verdict_exits_with_one() {
    // Distances given out of order can never pass the monotonicity check.
    let dir = tempfile::tempdir().unwrap();
    let out = glsim(&["beurling", "--radius", "16", "--distances", "8,2", "--walks", "200"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["passed"], false);
    assert!(dir.path().join("manifest.json").exists());
}
