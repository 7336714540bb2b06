//! End-to-end runs of the command line binary on the shipped scenarios.

use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kahlerfol")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

#[test]
fn ak_flat_passes() {
    let (code, out, _) = run(&["verify", scenario("ak_flat.json").to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn tightening_the_tolerance_can_fail_a_scenario() {
    let path = scenario("ak_disk_ex0.json");
    let (code, _, _) = run(&["verify", path.to_str().unwrap(), "--samples", "6", "--tol", "1e-6"]);
    assert_eq!(code, 0);
    let (code, out, _) = run(&["verify", path.to_str().unwrap(), "--samples", "6", "--tol", "1e-17"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("FAIL"));
}

#[test]
fn negative_controls_exit_one() {
    for f in ["twisted_calabi_zeta_bar.json", "ak_disk_ex0_mixed.json"] {
        let (code, out, _) = run(&["verify", scenario(f).to_str().unwrap(), "--samples", "6"]);
        assert_eq!(code, 1, "{f}: {out}");
    }
}

#[test]
fn malformed_file_exits_two_with_position() {
    let (code, _, err) = run(&["verify", scenario("malformed.json").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("malformed.json:4:"), "{err}");
    let (code, _, _) = run(&["verify", "/nonexistent/scenario.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn report_file_is_reproducible() {
    let dir = std::env::temp_dir();
    let (a, b) = (dir.join("kahlerfol_report_a.json"), dir.join("kahlerfol_report_b.json"));
    for out in [&a, &b] {
        let (code, _, _) = run(&["verify", scenario("calabi_flat.json").to_str().unwrap(), "--seed", "5", "--samples", "8", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    let read = |p: &PathBuf| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let (ra, rb) = (read(&a), read(&b));
    assert_eq!(ra["checks"], rb["checks"]);
    assert_eq!(ra["seed"], 5);
}

#[test]
fn curvature_command() {
    let (code, out, _) = run(&["curvature", scenario("round_sphere.json").to_str().unwrap(), "--point", "1.0471975511965976,0"]);
    assert_eq!(code, 0);
    assert!(out.contains("scalar            2.000000"), "{out}");
    let (code, _, _) = run(&["curvature", scenario("round_sphere.json").to_str().unwrap(), "--point", "5,0"]);
    assert_eq!(code, 2);
    let (code, out, _) = run(&["curvature", scenario("calabi_chain_ex1_m.json").to_str().unwrap(), "--point", "0.1,0.9,0.05,1.0,0.1,-0.1"]);
    assert_eq!(code, 0);
    let line = out.lines().find(|l| l.starts_with("|Ric|_g")).unwrap();
    let v: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!(v < 1e-5, "{line}");
}

#[test]
fn list_builders_is_stable() {
    let (code, a, _) = run(&["list-builders"]);
    assert_eq!(code, 0);
    assert_eq!(a, run(&["list-builders"]).1);
    assert!(a.contains("calabi_chain_ex1_m"));
}
