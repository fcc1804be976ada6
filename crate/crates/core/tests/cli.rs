//! End-to-end runs of the `orbitforge` binary.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitforge")).args(args).output().unwrap()
}

fn json_of(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(args: &[&str]) -> usize {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().lines().count() - 1
}

fn without_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn runs_are_deterministic() {
    let args = ["lazy", "--builtin", "dihedral", "--k", "5", "--probes", "8"];
    assert_eq!(without_time(json_of(&args)), without_time(json_of(&args)));
}

#[test]
fn orbit_row_counts() {
    assert_eq!(csv_rows(&["orbit", "--builtin", "cyclic", "--k", "4", "--v", "1,0", "--format", "csv"]), 4);
    assert_eq!(csv_rows(&["orbit", "--builtin", "dihedral", "--k", "3", "--v", "0.6,0.8", "--format", "csv"]), 6);
    assert_eq!(csv_rows(&["orbit", "--builtin", "dihedral", "--k", "3", "--v", "1,0", "--format", "csv"]), 3);
    assert_eq!(csv_rows(&["orbit", "--builtin", "so3_axis_fix", "--v", "1", "--format", "csv"]), 1);
}

#[test]
fn spec_file_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("g.json");
    // Coordinate swap in the plane: the orbit of a generic point has two elements.
    std::fs::write(&spec, r#"{"n":2,"finite_generators":[[0,1,1,0]]}"#).unwrap();
    let s = spec.to_str().unwrap();
    assert_eq!(csv_rows(&["orbit", "--spec", s, "--v", "0.6,0.8", "--format", "csv"]), 2);
    assert_eq!(csv_rows(&["orbit", "--spec", s, "--v", "1,1", "--format", "csv"]), 1);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, r#"{"n":2,"finite_generators":[[1,0,0,2]]}"#).unwrap();
    let out = run(&["orbit", "--spec", spec.to_str().unwrap(), "--v", "1,0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("orthogonal"));
    assert!(!run(&["orbit", "--builtin", "no_such_group", "--v", "1,0"]).status.success());
    assert!(!run(&["orbit", "--v", "1,0"]).status.success());
}

#[test]
fn maximin_of_square() {
    let v = json_of(&["maximin", "--builtin", "cyclic", "--k", "4", "--v", "1,0"]);
    let r = v["result"]["value"].as_f64().unwrap();
    // Chord from a vertex of the square to the midpoint of the opposite arc.
    let oracle = (2.0 - 2.0 * (std::f64::consts::PI / 4.0).cos()).sqrt();
    assert!((r - oracle).abs() < 1e-6, "{r}");
}

#[test]
fn minimax_on_a_latitude_circle() {
    let v = json_of(&["minimax", "--builtin", "so3_axis_fix", "--v", "0.6"]);
    let m2 = v["result"]["value_squared"].as_f64().unwrap();
    assert!((m2 - 2.0 * (1.0 - 0.6)).abs() < 1e-6, "{m2}");
}

#[test]
fn conic_build_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let body = dir.path().join("body.json");
    let b = body.to_str().unwrap();
    let out = run(&["conic", "build", "--builtin", "cyclic", "--k", "6", "--v", "1,0", "--out", b]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(b).exists());
    let g = |x: &str| {
        json_of(&["conic", "eval", "--body", b, "--x", x])["result"]["gauge"].as_f64().unwrap()
    };
    let (g1, g2) = (g("0.3,0.4"), g("0.6,0.8"));
    assert!((g2 - 2.0 * g1).abs() < 1e-8);
    // Rotating by a group element leaves the gauge unchanged.
    let a = std::f64::consts::PI / 3.0;
    let rot = format!("{},{}", 0.3 * a.cos() - 0.4 * a.sin(), 0.3 * a.sin() + 0.4 * a.cos());
    assert!((g(&rot) - g1).abs() < 1e-8);
}

#[test]
fn coarse_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let out = run(&["verify", "--only", "4", "--coarsen", "100", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}
