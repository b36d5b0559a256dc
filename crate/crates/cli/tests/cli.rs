//! End-to-end runs of the `csls` binary: exit codes, artifacts and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn csls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csls")).args(args).env_remove("CSLS_SDP_SOLVER").output().expect("spawn csls")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Compiles the two-label example model (window 3, two hits) into `dir`.
fn example_model(dir: &Path, plant: &str) -> std::path::PathBuf {
    let m = dir.join("model.json");
    let o = csls(&["compile-whrt", "--constraint", "whrt:2/3:zero", "--plant", plant, "--out", p(&m)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    m
}

#[test]
fn synthesize_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let m = example_model(dir.path(), "example:0.22535");
    let out = dir.path().join("syn");
    let o = csls(&["synthesize", "--model", p(&m), "--shared-gain", "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("certified gamma: 3.67"), "{text}");
    for f in ["certificate.json", "controller.json", "synthesize.txt", "synthesize.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let cert = out.join("certificate.json");
    let v = csls(&["validate", "--model", p(&m), "--certificate", p(&cert), "--out", p(&dir.path().join("v1"))]);
    assert_eq!(code(&v), 0);
    assert!(stdout(&v).contains("verdict: PASS"));

    // Another seed samples other walks but must not change the verdict.
    let v = csls(&["validate", "--model", p(&m), "--certificate", p(&cert), "--seed", "7", "--out", p(&dir.path().join("v2"))]);
    assert_eq!(code(&v), 0);
    assert!(stdout(&v).contains("verdict: PASS"));

    // Closed-loop analysis with the synthesized controller.
    let ctrl = out.join("controller.json");
    let a = csls(&["analyze", "--model", p(&m), "--controller", p(&ctrl), "--out", p(&dir.path().join("ana"))]);
    assert_eq!(code(&a), 0);
    assert!(stdout(&a).contains("all blocks PASS"));
}

#[test]
fn corrupted_certificate_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let m = example_model(dir.path(), "example");
    let out = dir.path().join("syn");
    assert_eq!(code(&csls(&["synthesize", "--model", p(&m), "--out", p(&out)])), 0);
    let path = out.join("certificate.json");
    let mut cert: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let mats = cert["matrices"].as_object_mut().unwrap();
    let key = mats.keys().find(|k| k.starts_with("Xt[")).unwrap().clone();
    let x = &mut mats.get_mut(&key).unwrap()[0][0];
    *x = Value::from(-x.as_f64().unwrap());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string_pretty(&cert).unwrap()).unwrap();
    let v = csls(&["validate", "--model", p(&m), "--certificate", p(&bad), "--out", p(&dir.path().join("v"))]);
    assert_eq!(code(&v), 3);
    let text = stdout(&v);
    assert!(text.lines().any(|l| l.starts_with("FAIL")), "{text}");
    assert!(text.contains("verdict: FAIL"), "{text}");
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = example_model(dir.path(), "example");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&csls(&["synthesize", "--model", p(&m), "--out", p(d)])), 0);
    }
    for f in ["synthesize.txt", "certificate.json", "controller.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn open_loop_robust_analysis_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let m = example_model(dir.path(), "example:0.22535");
    let o = csls(&["analyze", "--model", p(&m), "--mode", "robust", "--out", p(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn input_errors_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = csls(&["analyze", "--model", p(&missing), "--out", p(dir.path())]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
    let o = csls(&["compile-whrt", "--constraint", "whrt:0/3:zero", "--plant", "example", "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&o), 4);
    let o = csls(&["compile-whrt", "--constraint", "whrt:4/3:zero", "--plant", "example", "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&o), 4);
}

#[test]
fn trivial_constraint_gives_single_label() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let o = csls(&["compile-whrt", "--constraint", "whrt:1/1:zero", "--plant", "example", "--out", p(&m)]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("1 nodes, 1 labels"), "{text}");
}

#[test]
fn lift_prints_matrices() {
    let o = csls(&["lift", "--plant", "example", "--label", "2"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["label"], 2);
    assert_eq!(v["A"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_reports_every_delta() {
    let dir = tempfile::tempdir().unwrap();
    let m = example_model(dir.path(), "example:0.22535");
    let syn = dir.path().join("syn");
    assert_eq!(code(&csls(&["synthesize", "--model", p(&m), "--shared-gain", "--out", p(&syn)])), 0);
    let ctrl = syn.join("controller.json");
    let o = csls(&["sweep", "--model", p(&m), "--controller", p(&ctrl), "--sweep-delta=-0.2:0.2:0.1", "--jobs", "2", "--out", p(&dir.path().join("sw"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for d in ["-0.2", "-0.1", "0.1", "0.2"] {
        assert!(text.contains(d), "{d} missing from\n{text}");
    }
}
