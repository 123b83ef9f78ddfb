use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swerve-safety"));
    c.env_remove("SWERVE_SAFETY_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn distance_of(v: &Value, scenario: &str) -> f64 {
    v["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["scenario"] == scenario)
        .unwrap()["distance"]
        .as_f64()
        .unwrap()
}

#[test]
fn standstill_brake_distance_is_contact() {
    let out = run(&["distance", "--scenario", "bb", "--vr", "0", "--vf", "0", "--rho", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((distance_of(&json(&out), "bb") - 4.7).abs() < 1e-9);
}

#[test]
fn literal_flag_changes_the_result() {
    let corrected = json(&run(&["distance", "--scenario", "sb", "--vr", "20", "--vf", "0"]));
    let literal = json(&run(&["distance", "--scenario", "sb", "--vr", "20", "--vf", "0", "--literal-formulas"]));
    assert_eq!(corrected["mode"], "corrected");
    assert_eq!(literal["mode"], "literal");
    assert!(distance_of(&literal, "sb") > distance_of(&corrected, "sb"));
}

#[test]
fn all_scenarios_by_default() {
    let v = json(&run(&["distance", "--vr", "15", "--vf", "10"]));
    let names: Vec<_> = v["scenarios"].as_array().unwrap().iter().map(|s| s["scenario"].clone()).collect();
    assert_eq!(names.len(), 4);
    assert!(v["rules"].as_array().unwrap().is_empty());
    let v = json(&run(&["distance", "--rule", "universal,rss-braking", "--vr", "15", "--vf", "10"]));
    assert_eq!(v["rules"].as_array().unwrap().len(), 2);
    assert!(v["scenarios"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["distance", "--vr", "x", "--vf", "0"]).status.code(), Some(2));
    assert_eq!(run(&["distance", "--scenario", "zz", "--vr", "1", "--vf", "0"]).status.code(), Some(2));
    assert_eq!(run(&["--set", "nope=1", "distance", "--vr", "1", "--vf", "0"]).status.code(), Some(2));
    let out = run(&["--set", "a_lat_min=0.01", "distance", "--scenario", "sb", "--vr", "20", "--vf", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn single_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    let out = run(&[
        "--out",
        path.to_str().unwrap(),
        "sweep",
        "--start",
        "12",
        "--stop",
        "12",
        "--step",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("# config "));
    assert!(lines[1].starts_with("v,d_bb,d_sb,d_bs,d_ss"));
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("12,"));
}

#[test]
fn sweep_failures_go_to_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let out = run(&[
        "--set",
        "a_lat_min=0.01",
        "--out",
        path.to_str().unwrap(),
        "sweep",
        "--start",
        "0",
        "--stop",
        "20",
        "--step",
        "10",
    ]);
    let code = out.status.code().unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<_> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    let sidecar = dir.path().join("bad.csv.warnings");
    assert!(fs::read_to_string(sidecar).unwrap().contains("unreachable"));
    // the stationary row still has a value, so the run succeeds
    assert_eq!(code, 0);
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.txt");
    fs::write(&path, "# zero reaction\nrho = 0\n").unwrap();
    let out = bin()
        .env("SWERVE_SAFETY_CONFIG", &path)
        .args(["distance", "--scenario", "bb", "--vr", "0", "--vf", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!((distance_of(&json(&out), "bb") - 4.7).abs() < 1e-9);

    fs::write(&path, "rho = fast\n").unwrap();
    let out = bin()
        .env("SWERVE_SAFETY_CONFIG", &path)
        .args(["distance", "--vr", "0", "--vf", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_is_deterministic_across_jobs() {
    let args = ["verify", "theorems", "--cases", "10", "--blocks", "5"];
    let a = run(&[&["--jobs", "1"][..], &args].concat());
    let b = run(&[&["--jobs", "2"][..], &args].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["ok"], true);
}

#[test]
fn swerve_profile_csv() {
    let out = run(&["swerve-profile", "--v", "15", "--dt", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config "));
    assert_eq!(lines.next().unwrap(), "t,x,y,theta,psi");
    assert!(lines.count() > 5);
}
