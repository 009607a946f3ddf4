use std::path::{Path, PathBuf};
use std::process::Command;

use cauchylab::{OpMeasure, SimpleOpMeasure};
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cauchylab"))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

/// Runs `cauchylab <cmd> --config <cfg> --out <dir>/out` and returns the exit code.
fn run(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn unit_atom(dir: &Path) -> PathBuf {
    let path = dir.join("atom.json");
    OpMeasure::from(SimpleOpMeasure::scalar(&[(0.0, 1.0)]).unwrap()).save_json(&path).unwrap();
    path
}

#[test]
fn cz_on_single_atom_passes() {
    let dir = TempDir::new().unwrap();
    let fixture = unit_atom(dir.path());
    let cfg = write_json(
        dir.path(),
        "cz.json",
        &json!({ "command": "cz", "measure": { "fixture": fixture }, "cz": { "levels": [1.0], "relative_levels": [] } }),
    );
    let out = dir.path().join("out");
    assert_eq!(run("cz", &cfg, &out, &[]), 0);
    let s = summary(&out);
    assert_eq!(s["pass"], json!(true));
    assert_eq!(s["command"], json!("cz"));
    assert_eq!(s["config_sha256"].as_str().unwrap().len(), 64);
    assert!(out.join("cz.csv").exists());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("cz_0_0.json")).unwrap()).unwrap();
    // A unit atom at 0 against s = 1: the maximal dyadic interval is [0, 1).
    assert_eq!(report["intervals"].as_array().unwrap().len(), 1);
}

#[test]
fn corrupted_fixture_is_an_error() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{ \"simple\": [1, 2").unwrap();
    let cfg = write_json(dir.path(), "cz.json", &json!({ "measure": { "fixture": "bad.json" } }));
    assert_eq!(run("cz", &cfg, &dir.path().join("out"), &[]), 2);
}

#[test]
fn unknown_fields_and_wrong_command_are_errors() {
    let dir = TempDir::new().unwrap();
    let typo = write_json(dir.path(), "typo.json", &json!({ "sede": 3 }));
    assert_eq!(run("sweep", &typo, &dir.path().join("a"), &[]), 2);
    let wrong = write_json(dir.path(), "wrong.json", &json!({ "command": "scatter" }));
    assert_eq!(run("sweep", &wrong, &dir.path().join("b"), &[]), 2);
}

#[test]
fn weaknorm_on_unit_atom() {
    let dir = TempDir::new().unwrap();
    let fixture = unit_atom(dir.path());
    let cfg = write_json(
        dir.path(),
        "w.json",
        &json!({
            "measure": { "fixture": fixture },
            "weaknorm": { "operators": ["M", "H"], "grid": { "span": 100.0, "count": 10000 } }
        }),
    );
    let out = dir.path().join("out");
    assert_eq!(run("weaknorm", &cfg, &out, &[]), 0);
    let s = summary(&out);
    let results = s["results"].as_array().unwrap();
    let m = results[0]["quasinorm"].as_f64().unwrap();
    let h = results[1]["quasinorm"].as_f64().unwrap();
    assert!((m - 1.0).abs() < 1e-9, "M: {m}");
    assert!((h - 2.0).abs() < 1e-9, "H: {h}");
    assert_eq!(results[0]["atoms_on_grid"], json!(1));
    let csv = std::fs::read_to_string(out.join("weaknorm_M.csv")).unwrap();
    assert!(csv.starts_with("lambda,value\n"));
    assert!(csv.contains("inf"));
}

#[test]
fn scatter_without_coupling_is_trivial() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "s.json",
        &json!({
            "p": 2,
            "scatter": {
                "example": { "grid": 32, "j": [0.0] },
                "wave": { "t0": 1.0, "doublings": 4 },
                "det": { "lambdas": [0.5], "epsilons": [0.1, 0.01] }
            }
        }),
    );
    let out = dir.path().join("out");
    assert_eq!(run("scatter", &cfg, &out, &[]), 0);
    let s = summary(&out);
    for e in s["results"]["identities"].as_array().unwrap() {
        assert_eq!(e["status"], json!("ok"));
        assert_eq!(e["residuals"]["r1"].as_f64().unwrap(), 0.0);
        assert_eq!(e["residuals"]["r2"].as_f64().unwrap(), 0.0);
    }
    // H₁ = H₀: the wave operator is the identity at every time.
    for inc in s["results"]["wave"]["increments"].as_array().unwrap() {
        assert!(inc.as_f64().unwrap() < 1e-12);
    }
    assert_eq!(s["results"]["det"]["disagreements"], json!(0));
    let det = std::fs::read_to_string(out.join("det.csv")).unwrap();
    for line in det.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 1.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn hypothesis_with_zero_free_hamiltonian_is_tight() {
    let dir = TempDir::new().unwrap();
    write_json(
        dir.path(),
        "model.json",
        &json!({
            "H0": { "re": [[0.0, 0.0], [0.0, 0.0]] },
            "G": { "re": [[1.0, 0.5]] },
            "J": { "re": [[1.0]] }
        }),
    );
    let cfg = write_json(
        dir.path(),
        "s.json",
        &json!({ "p": 1, "scatter": { "model": "model.json", "points": [[0.0, 1.0]], "hypothesis": { "interval": [-1.0, 1.0], "depth": 3 } } }),
    );
    let out = dir.path().join("out");
    assert_eq!(run("scatter", &cfg, &out, &[]), 0);
    let h = &summary(&out)["results"]["hypothesis"];
    assert_eq!(h["pass"], json!(true), "{h}");
    // Every probe interval either contains the single eigenvalue 0 or sees
    // nothing, so the smallest admissible ν₀ meets the norm exactly.
    assert!(h["worst"]["margin"].as_f64().unwrap().abs() < 1e-12, "{h}");
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_json(
        dir.path(),
        "sweep.json",
        &json!({ "seed": 7, "measure": { "count": 3 }, "sweep": { "grid": { "span": 4.0, "count": 60 } } }),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("sweep", &cfg, &a, &["--threads", "1"]), 0);
    assert_eq!(run("sweep", &cfg, &b, &["--threads", "2"]), 0);
    for f in ["sweep.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    assert_eq!(run("sweep", &cfg, &c, &["--seed", "8"]), 0);
    assert_ne!(summary(&a)["config_sha256"], summary(&c)["config_sha256"]);
}
