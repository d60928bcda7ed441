use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use volterra::verify::{CheckResult, SpectrumReport};
use volterra::PeriodicOperator;

fn volterra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volterra")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("volterra-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(n: usize, seed: u64, name: &str) -> PathBuf {
    let path = scratch(name);
    let out = volterra(&["gen", "--N", &n.to_string(), "--seed", &seed.to_string(), "--out", s(&path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn verify_random_n2_passes() {
    let op = gen(2, 4, "n2.json");
    let out = volterra(&["verify", "--in", s(&op)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let checks: Vec<CheckResult> = serde_json::from_slice(&out.stdout).unwrap();
    let mut criteria: Vec<usize> = checks.iter().map(|c| c.criterion()).collect();
    criteria.dedup();
    assert_eq!(criteria, (1..=15).collect::<Vec<_>>());
    let names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn verify_single_suite() {
    let op = gen(2, 4, "suite.json");
    let out = volterra(&["verify", "--in", s(&op), "--suite", "poisson"]);
    assert_eq!(out.status.code(), Some(0));
    let checks: Vec<CheckResult> = serde_json::from_slice(&out.stdout).unwrap();
    assert!(checks.iter().all(|c| [7, 8, 9, 10, 14].contains(&c.criterion())));
}

#[test]
fn tight_tolerance_fails_with_exit_1() {
    let op = gen(2, 4, "tight.json");
    let out = volterra(&["verify", "--in", s(&op), "--suite", "flows", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn constant_lattice_is_singular() {
    let path = scratch("flat.json");
    std::fs::write(&path, r#"{"T": 3, "c": [1, 1, 1]}"#).unwrap();
    let out = volterra(&["verify", "--in", s(&path)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("SingularCurve:"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn gen_is_deterministic() {
    let a = std::fs::read(gen(3, 99, "a.json")).unwrap();
    let b = std::fs::read(gen(3, 99, "b.json")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, std::fs::read(gen(3, 100, "c.json")).unwrap());
}

#[test]
fn spectrum_round_trip() {
    let path = gen(3, 8, "rt.json");
    let out = volterra(&["spectrum", "--in", s(&path)]);
    assert!(out.status.success());
    let report: SpectrumReport = serde_json::from_slice(&out.stdout).unwrap();
    let op = PeriodicOperator::read_json(&path).unwrap();
    let direct = volterra::verify::spectrum_report(&op, &Default::default()).unwrap();
    assert_eq!(report.i, direct.i);
    assert_eq!(report.sheet.len(), op.n());
    assert!(report.nonsingular);
}

#[test]
fn mismatched_period_is_rejected() {
    let path = scratch("bad.json");
    std::fs::write(&path, r#"{"T": 5, "c": [1, 2, 3]}"#).unwrap();
    let out = volterra(&["invariants", "--in", s(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("InvalidInput:"));
}

#[test]
fn invariants_and_expand() {
    let path = gen(2, 5, "inv.json");
    let out = volterra(&["invariants", "--in", s(&path)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["J", "J_from_I", "lnDelta_coeffs", "lnRho_coeffs"] {
        assert!(v[key].is_array(), "{key}");
    }
    let j = v["J"].as_array().unwrap();
    let from_i = v["J_from_I"].as_array().unwrap();
    for k in 1..j.len() {
        let (a, b) = (j[k].as_f64().unwrap(), from_i[k - 1].as_f64().unwrap());
        assert!((a - b).abs() < 1e-10 * a.abs());
    }
    let out = volterra(&["expand", "--in", s(&path), "--order", "6"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["log_rho"].as_array().unwrap().len(), 7);
}

#[test]
fn evolve_writes_csv_and_drift_table() {
    let path = gen(2, 6, "ev.json");
    let csv = scratch("traj.csv");
    let out = volterra(&["evolve", "--in", s(&path), "--flow", "2", "--t-end", "0.5", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,c_1,c_2,c_3,c_4,c_5"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let drift = v["drift"]["i_drift"].as_array().unwrap();
    assert!(drift.iter().all(|d| d.as_f64().unwrap() < 1e-7));

    let out = volterra(&["evolve", "--in", s(&path), "--flow", "3", "--t-end", "0.5", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(2));
}
