use std::path::Path;
use std::process::{Command, Output};

use curvkit::VerificationReport;
use serde_json::Value;

fn curvkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvkit"))
        .args(args)
        .env("CURVKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (i32, Value) {
    let path = dir.join(name);
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.extend(["--out", &p]);
    let out = curvkit(&all);
    let text = std::fs::read_to_string(&path).expect("report written");
    (out.status.code().unwrap(), serde_json::from_str(&text).unwrap())
}

fn records(doc: &Value) -> Vec<VerificationReport> {
    serde_json::from_value(doc["records"].clone()).unwrap()
}

fn row<'a>(recs: &'a [VerificationReport], id: &str) -> &'a VerificationReport {
    recs.iter().find(|r| r.check_id == id).unwrap_or_else(|| panic!("no row {id}"))
}

#[test]
fn exit_zero_when_everything_passes() {
    let out = curvkit(&["verify", "--suite", "algebra", "--n", "6", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = records(&doc);
    let ids: Vec<_> = recs.iter().map(|r| r.check_id.as_str()).collect();
    assert_eq!(ids, ["algebra.kulkarni", "algebra.commutation", "algebra.adjointness"]);
    assert!(recs.iter().all(|r| r.pass && r.seed == Some(7)));
    assert_eq!(doc["run"]["seed"], 7);
}

#[test]
fn exit_one_on_failed_assertion() {
    let out = curvkit(&["verify", "--suite", "curvature", "--quick", "--tol-scale", "1e-300"]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(records(&doc).iter().any(|r| !r.pass));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[FAIL]"));
}

#[test]
fn exit_two_on_configuration_errors() {
    for args in [
        vec!["verify", "--suite", "everything"],
        vec!["verify", "--model", "klein-bottle"],
        vec!["invariants", "--model", "nowhere"],
        vec!["verify", "--tol-scale", "-1"],
        vec!["functional", "--res", "0"],
        vec!["functional", "--model", "sphere"],
        vec!["invariants", "--model", "sphere", "--n", "5", "--k", "3"],
        vec!["invariants", "--model", "hyperbolic", "--mu", "1"],
        vec!["invariants", "--model", "lovelock", "--eps", "-1", "--mass", "5"],
    ] {
        let out = curvkit(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?} wrote a report");
    }
    // clap usage errors share the configuration exit code
    assert_eq!(curvkit(&["verify", "--n", "five"]).status.code(), Some(2));
}

#[test]
fn identical_config_gives_identical_payload() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--suite", "linearization", "--model", "perturbed-torus", "--quick", "--seed", "11"];
    let strip = |mut doc: Value| {
        for r in doc["records"].as_array_mut().unwrap() {
            r.as_object_mut().unwrap().remove("duration_ms");
        }
        serde_json::to_string(&doc).unwrap()
    };
    let (a_code, a) = run_to(dir.path(), "a.json", &args);
    let (b_code, b) = run_to(dir.path(), "b.json", &args);
    assert_eq!((a_code, b_code), (0, 0));
    assert_eq!(strip(a), strip(b));
}

#[test]
fn reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (_, doc) = run_to(dir.path(), "r.json", &["verify", "--suite", "curvature", "--model", "conformally-flat", "--quick"]);
    let recs = records(&doc);
    assert!(!recs.is_empty());
    let again: Vec<VerificationReport> = serde_json::from_str(&serde_json::to_string(&recs).unwrap()).unwrap();
    assert_eq!(again, recs);
    for r in &recs {
        assert_eq!(r.pass, r.residual <= r.tolerance);
        assert!(!r.anchor.is_empty() && r.duration_ms >= 0.0);
    }
}

#[test]
fn invariants_examples() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run_to(dir.path(), "s.json", &["invariants", "--model", "sphere", "--n", "5", "--mu", "1", "--k", "2"]);
    assert_eq!(code, 0);
    for p in doc["invariants"].as_array().unwrap() {
        assert!((p["s2k"].as_f64().unwrap() - 30.0).abs() < 1e-9);
        assert_eq!(p["rigidity"]["satisfied"], true);
    }
    assert!(row(&records(&doc), "invariants.lambda").pass);

    let (code, doc) = run_to(dir.path(), "f.json", &["invariants", "--model", "flat", "--n", "5", "--k", "2"]);
    assert_eq!(code, 0);
    for p in doc["invariants"].as_array().unwrap() {
        assert_eq!(p["kappa"].as_f64().unwrap(), 0.0);
        assert_eq!(p["s2k"].as_f64().unwrap(), 0.0);
    }

    // the slice is not of constant S^(4) once m != 0
    let (code, doc) = run_to(dir.path(), "l.json", &["invariants", "--model", "lovelock", "--n", "5", "--k", "2", "--eps", "1", "--mass", "0.1"]);
    assert_eq!(code, 1);
    assert!(!row(&records(&doc), "invariants.lovelock-constancy").pass);
}

#[test]
fn verify_examples() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run_to(dir.path(), "lin.json", &["verify", "--suite", "linearization", "--model", "sphere", "--n", "5", "--k", "2"]);
    assert_eq!(code, 0);
    let recs = records(&doc);
    for id in ["linearization.riemann-fd", "linearization.ricci-fd", "linearization.scalar-fd"] {
        assert!(row(&recs, id).pass);
    }
    let (code, doc) = run_to(dir.path(), "all.json", &["verify", "--suite", "all", "--quick"]);
    assert_eq!(code, 0);
    let suites: std::collections::BTreeSet<_> = records(&doc).into_iter().map(|r| r.suite).collect();
    assert_eq!(suites.len(), 4);
}

#[test]
fn functional_examples() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run_to(dir.path(), "p.json", &["functional", "--model", "perturbed-torus", "--n", "5", "--k", "2", "--res", "8"]);
    assert_eq!(code, 0);
    let g = records(&doc);
    let g = row(&g, "functional.gradient.k2");
    assert!(g.residual <= 1e-2);

    let (code, doc) = run_to(dir.path(), "flat.json", &["functional", "--model", "flat", "--n", "5", "--k", "2", "--res", "8"]);
    assert_eq!(code, 0);
    for r in records(&doc).iter().filter(|r| !r.check_id.contains("volume")) {
        assert!(r.lhs.norm.abs() < 1e-9 && r.rhs.norm.abs() < 1e-9, "{}", r.line());
    }

    let (code, doc) = run_to(dir.path(), "k1.json", &["functional", "--model", "perturbed-torus", "--n", "3", "--k", "1", "--res", "16"]);
    assert_eq!(code, 0);
    assert!(row(&records(&doc), "functional.gradient.k1").residual <= 1e-3);
}
