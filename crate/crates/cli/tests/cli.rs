use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lumen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumen")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&lumen(&["--help"])), 0);
    assert_eq!(code(&lumen(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&lumen(&[])), 1);
    assert_eq!(code(&lumen(&["frobnicate"])), 1);
    assert_eq!(code(&lumen(&["raytrace", "x", "--rays", "many"])), 1);
}

#[test]
fn single_target_gives_one_ellipsoid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sol");
    let out =
        lumen(&["solve", configs().join("single_target.json").to_str().unwrap(), "-o", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let eta = fs::read_to_string(out_dir.join("eta.csv")).unwrap();
    assert_eq!(eta.lines().count(), 2);
    let fields: Vec<&str> = eta.lines().nth(1).unwrap().split(',').collect();
    let y: Vec<f64> = fields[1..4].iter().map(|s| s.parse().unwrap()).collect();

    // every vertex Z lies on one ellipsoid with foci 0 and Y: |Z| + |Z - Y| is constant
    let mesh = fs::read_to_string(out_dir.join("mesh.obj")).unwrap();
    let sums: Vec<f64> = mesh
        .lines()
        .filter(|l| l.starts_with("v "))
        .map(|line| {
            let z: Vec<f64> = line.split_whitespace().skip(1).map(|s| s.parse().unwrap()).collect();
            let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            r + z.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .collect();
    let (lo, hi) = sums.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    let worst = (hi - lo) / hi;
    assert!(worst < 1e-12, "{worst}");

    let out = lumen(&["raytrace", out_dir.to_str().unwrap(), "--rays", "10000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rt: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("raytrace.json")).unwrap()).unwrap();
    assert!(rt["tv"].as_f64().unwrap() < 1e-12);
}

const SMALL: &str = r#"{
  "schema": 1,
  "dimension": 2,
  "source": { "center": [0, 0, 1], "angular_radius": 0.4, "cells": 24 },
  "target": {
    "kind": "level_set",
    "surface": { "type": "plane", "height": -10 },
    "samples": { "mode": "random", "count": 4, "spread": 2 }
  },
  "solver": { "max_outer": 1 },
  "seed": 11
}"#;

#[test]
fn malformed_config_exits_one_with_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sol");
    let o = out_dir.to_str().unwrap();

    let cfg = write_config(dir.path(), &SMALL.replace("\"cells\": 24", "\"cells\": 24, \"colour\": 1"));
    let out = lumen(&["solve", &cfg, "-o", o]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), &SMALL.replace("\"angular_radius\": 0.4", "\"angular_radius\": -1"));
    let out = lumen(&["solve", &cfg, "-o", o]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("source.angular_radius"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), "{ \"schema\": 1, ");
    assert_eq!(code(&lumen(&["solve", &cfg, "-o", o])), 1);
    assert_eq!(code(&lumen(&["solve", "/nonexistent/config.json", "-o", o])), 1);
    assert!(!out_dir.exists(), "no artifacts on input errors");
}

#[test]
fn non_convergence_exits_two_and_still_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("sol");
    let out = lumen(&["solve", &cfg, "-o", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["converged"], false);
    assert_eq!(rep["config"]["seed"], 11);
    assert_eq!(rep["n_target"], 4);
}

#[test]
fn solution_round_trips_from_disk_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"max_outer\": 1", "\"max_outer\": 200"));
    let first = dir.path().join("a");
    assert_eq!(code(&lumen(&["solve", &cfg, "-o", first.to_str().unwrap()])), 0);
    // the original config file is not needed any more
    fs::remove_file(&cfg).unwrap();
    let moved = dir.path().join("b");
    fs::rename(&first, &moved).unwrap();
    let out = lumen(&["raytrace", moved.to_str().unwrap(), "--rays", "20000", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let hist = fs::read_to_string(moved.join("histogram.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "index,count,histogram,expected");
    assert_eq!(hist.lines().count(), 5);
}

#[test]
fn raytrace_without_solution_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lumen(&["raytrace", dir.path().join("missing").to_str().unwrap()])), 1);
    // directory present, artifacts missing
    assert_eq!(code(&lumen(&["raytrace", dir.path().to_str().unwrap()])), 1);
}

#[test]
fn verify_reports_each_invariant() {
    let out = lumen(&["verify", "ellipsoid", "--size", "tiny"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["focal_sum", "reflection_closure", "eccentricity_identity"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{text}");
    }
    assert_eq!(code(&lumen(&["verify", "optics"])), 1);
    assert_eq!(code(&lumen(&["verify", "geometry", "--size", "huge"])), 1);
}

#[test]
fn verify_farfield_emits_the_rate_table() {
    let out = lumen(&["verify", "farfield", "--size", "tiny"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r,beta_gap,t_gap,matrix_gap,skipped"), "{text}");
}

#[test]
fn residual_study_exit_codes() {
    let out = lumen(&["residual", "--catalog", "bump-envelope", "--levels", "32,64,128"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let out = lumen(&["residual", "--catalog", "single-ellipsoid", "--levels", "16,32"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("degenerate"));

    assert_eq!(code(&lumen(&["residual", "--catalog", "paraboloid"])), 1);
    assert_eq!(code(&lumen(&["residual", "--catalog", "bump-envelope", "--levels", "64,32"])), 1);
}
