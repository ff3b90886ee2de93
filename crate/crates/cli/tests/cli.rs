use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onofri_core::convergence::Quadrature;
use onofri_core::extremals::{build_extremal, psi_field};
use onofri_core::mobius::{ConformalMap, Generator};
use onofri_core::sphere::{build_grid, Point3};
use serde_json::Value;

fn onofri(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onofri"))
        .args(args)
        .env_remove("ONOFRI_TOL_SCALE")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const FIELD: &str = r#"{"l_max":2,"coeffs":[0.0,0.1,0.3,-0.2,0.05,0.1,0.0,0.2,-0.1]}"#;

#[test]
fn verify_lorentz_passes() {
    let out = onofri(&["verify", "lorentz"]);
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("metric preserved"));
    assert!(!table.contains("FAIL"));
}

#[test]
fn verify_writes_json_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("v.json");
    let out = onofri(&[
        "verify",
        "tauhalf",
        "--seed",
        "7",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["suite"], "tauhalf");
    assert_eq!(v["pass"], true);
}

#[test]
fn tiny_tolerance_scale_fails_with_exit_1() {
    let out = Command::new(env!("CARGO_BIN_EXE_onofri"))
        .args(["verify", "lorentz"])
        .env("ONOFRI_TOL_SCALE", "1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(onofri(&["verify", "nope"]).status.code(), Some(2));
    assert_eq!(
        onofri(&["eval", "/nonexistent/u.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        onofri(&["--tol-scale=-1", "verify", "el"]).status.code(),
        Some(2)
    );
    assert_eq!(
        onofri(&["--jobs", "0", "verify", "el"]).status.code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"l_max":2,"coeffs":[1.0]}"#);
    assert_eq!(onofri(&["eval", &bad]).status.code(), Some(2));
    let sing = write(
        dir.path(),
        "m.json",
        r#"{"a":[0,0],"b":[0,0],"c":[0,0],"d":[0,0]}"#,
    );
    assert_eq!(onofri(&["lift", &sing]).status.code(), Some(2));
}

#[test]
fn eval_zero_field_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "zero.json", r#"{"l_max":0,"coeffs":[0.0]}"#);
    let out = onofri(&["eval", &f]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["value"].as_f64().unwrap(), 0.0);
    assert!((v["report"]["alpha"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(v["config"]["input"], f);
}

#[test]
fn eval_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "u.json", FIELD);
    let a = onofri(&["eval", &f, "--alpha", "1/2"]);
    let b = onofri(&["eval", &f, "--alpha", "0.5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn normalize_writes_centred_field() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "u.json", FIELD);
    let out = onofri(&["normalize", &f]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["result"]["residual_com_norm"].as_f64().unwrap() < 1e-10);
    let written = dir.path().join("u.normalized.json");
    assert_eq!(v["field_file"], written.to_str().unwrap());
    let field: Value = serde_json::from_str(&fs::read_to_string(&written).unwrap()).unwrap();
    assert_eq!(field["l_max"], 32);
}

#[test]
fn stability_sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let run = |csv: &Path, jobs: &str| {
        onofri(&[
            "stability",
            "--random",
            "3",
            "--seed",
            "42",
            "--jobs",
            jobs,
            "--csv",
            csv.to_str().unwrap(),
        ])
    };
    let a = run(&csv_a, "1");
    let b = run(&csv_b, "2");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(fs::read(&csv_a).unwrap(), fs::read(&csv_b).unwrap());
    let csv = fs::read_to_string(&csv_a).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("seed,deficit,distance,slack,log_lambda,beta1,beta2")
    );
    assert_eq!(lines.count(), 3);
    let (v, w) = (json(&a), json(&b));
    assert_eq!(v["samples"], w["samples"]);
    assert_eq!(v["samples"][0]["seed"], 42);
    assert_eq!(v["samples"][2]["seed"], 44);
    assert!(v["min_slack"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["all_converged"], true);
}

#[test]
fn stability_needs_exactly_one_input() {
    assert_eq!(onofri(&["stability"]).status.code(), Some(2));
}

#[test]
fn lift_of_dilation_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let s = std::f64::consts::SQRT_2;
    let m = write(
        dir.path(),
        "m.json",
        &format!(r#"{{"a":[{s},0],"b":[0,0],"c":[0,0],"d":[{},0]}}"#, 1.0 / s),
    );
    let out = onofri(&["lift", &m]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let l: Vec<f64> = v["matrix"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((l[0] - 1.25).abs() < 1e-12);
    assert_eq!(v["renormalized"], false);
    assert_eq!(v["pass"], true);
}

#[test]
fn lift_renormalizes_and_rejects_reflections() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"a":[2,0],"b":[0,0],"c":[0,0],"d":[2,0]}"#,
    );
    let out = onofri(&["lift", &m]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["renormalized"], true);
    assert!(String::from_utf8(out.stderr).unwrap().contains("warning"));

    let r = write(
        dir.path(),
        "r.json",
        r#"{"a":[1,0],"b":[0,0],"c":[0,0],"d":[1,0],"reflect":true}"#,
    );
    assert_eq!(onofri(&["lift", &r]).status.code(), Some(2));
}

fn psi_file(dir: &Path, tau: ConformalMap) -> String {
    let quad = Quadrature::new(build_grid(48, 1.0).unwrap());
    let e = build_extremal(&tau, &quad).unwrap();
    let p = psi_field(&e, 32, &quad).unwrap();
    write(dir, "psi.json", &serde_json::to_string(&p.field).unwrap())
}

fn dilation(lambda: f64) -> ConformalMap {
    Generator::Dilation { lambda }.to_map().unwrap()
}

#[test]
fn extremal_field_has_zero_functional() {
    let dir = tempfile::tempdir().unwrap();
    let f = psi_file(dir.path(), dilation(2.0));
    let out = onofri(&["eval", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["report"]["value"].as_f64().unwrap().abs() <= 1e-8);
}

#[test]
fn normalizing_an_extremal_gives_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    let tau = dilation(1.5).compose(
        &Generator::Translation {
            target: Point3::new(0.6, 0.0, -0.8),
        }
        .to_map()
        .unwrap(),
    );
    let f = psi_file(dir.path(), tau);
    let out = onofri(&["normalize", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["nonconstant_energy"].as_f64().unwrap() < 1e-7);
}

#[test]
fn zero_field_normalizes_to_identity() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "zero.json", r#"{"l_max":0,"coeffs":[0.0]}"#);
    let out = onofri(&["normalize", &f]);
    assert_eq!(out.status.code(), Some(0));
    let tau = &json(&out)["result"]["tau"];
    let entry = |k: &str, i: usize| tau[k][i].as_f64().unwrap();
    for (k, want) in [("a", 1.0), ("b", 0.0), ("c", 0.0), ("d", 1.0)] {
        assert!((entry(k, 0) - want).abs() < 1e-14, "{k}");
        assert!(entry(k, 1).abs() < 1e-14, "{k}");
    }
    assert_eq!(tau["reflect"], false);
}

#[test]
fn stability_of_zero_and_extremal_fields() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(dir.path(), "zero.json", r#"{"l_max":0,"coeffs":[0.0]}"#);
    let csv = dir.path().join("z.csv");
    let out = onofri(&["stability", &zero, "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["samples"][0]["report"];
    assert_eq!(r["deficit"].as_f64().unwrap(), 0.0);
    assert!(r["distance"].as_f64().unwrap().abs() < 1e-12);

    let psi = psi_file(dir.path(), dilation(2.0));
    let out = onofri(&["stability", &psi]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["samples"][0]["report"];
    assert!(r["deficit"].as_f64().unwrap().abs() < 1e-7);
    assert!(r["distance"].as_f64().unwrap() < 1e-7);
}

#[test]
fn invariance_suite_with_seed_7() {
    let out = onofri(&["verify", "invariance", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
}
