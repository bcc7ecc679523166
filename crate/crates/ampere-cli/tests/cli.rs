use std::path::Path;
use std::process::{Command, Output};

fn ampere(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ampere")).arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn lemma_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ampere(dir.path(), &["lemma-suite", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn harnack_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let o = ampere(dir.path(), &["harnack", "--epsilon", "0.01", "--t", "0.25,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("harnack.csv")).unwrap();
    let t = column(&csv, "t");
    let ratio = column(&csv, "ratio");
    assert_eq!(t, [0.25, 0.5]);
    for (t, r) in t.iter().zip(&ratio) {
        assert!((r - (t + 1.0) / (1.0 - t)).abs() <= 1e-6);
    }
}

#[test]
fn centered_dirac_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let o = ampere(dir.path(), &["solve-ma", "--dirac", "0,0,1", "--domain", "disk"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert!(json["vertices"].as_array().unwrap().len() > 3);
    let csv = std::fs::read_to_string(dir.path().join("error.csv")).unwrap();
    let worst = column(&csv, "error").into_iter().fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ampere(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(ampere(dir.path(), &["--tol", "conv", "harnack"]).status.code(), Some(2));
    assert_eq!(ampere(dir.path(), &["--tol", "bogus=1e-3", "harnack"]).status.code(), Some(2));
    assert_eq!(ampere(dir.path(), &["--config", "x.json", "harnack"]).status.code(), Some(2));
}

#[test]
fn coarse_cone_misses_the_apex_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = ampere(dir.path(), &["ma-measure", "--rays", "4", "--rings", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn abreu_config_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("abreu.json");
    let text = r#"{
        "G": {"kind": "log"},
        "problem": {
            "domain": {"lo": [-1, -1], "hi": [1, 1], "cells": [12, 12]},
            "f": {"kind": "constant", "value": 0},
            "phi": {"kind": "quadratic", "a": [[1, 0], [0, 1]], "b": [0, 0], "c": 0},
            "psi": {"kind": "constant", "value": 1}
        },
        "t_steps": 3
    }"#;
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_ampere")).arg("--out").arg(&out).arg("--config").arg(&cfg).arg("solve-abreu").output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("pass  quadratic exactness"), "{stdout}");
    assert!(out.join("path.csv").exists());
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [&["john", "--svg", "--random", "10"][..], &["sections", "--svg", "--n", "120"], &["solve-linma", "--svg", "--n", "16"]] {
        assert_eq!(ampere(a.path(), args).status.code(), Some(0), "{args:?}");
        assert_eq!(ampere(b.path(), args).status.code(), Some(0), "{args:?}");
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let ext = Path::new(&name).extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext == "csv" || ext == "svg" {
            assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap(), "{name:?}");
            compared += 1;
        }
    }
    assert!(compared >= 6);
}
