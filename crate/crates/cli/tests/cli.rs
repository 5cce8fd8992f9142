use std::path::Path;
use std::process::{Command, Output};

fn wair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wair"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SHORT: &str = "t_f = 0.5\nN = 7\nthrust_enabled = false\n[rollout]\nenabled = false\n";

#[test]
fn check_static_reports_feasibility() {
    let out = wair(&["check-static", "--slope", "30", "--mu", "0.7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).starts_with("feasible"));

    let out = wair(&["check-static", "--slope", "45", "--mu", "0.7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("infeasible"));

    // enough up-slope thrust makes the same slope holdable
    let out = wair(&["check-static", "--slope", "45", "--mu", "0.7", "--thrust", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn check_static_rejects_bad_friction() {
    let out = wair(&["check-static", "--slope", "10", "--mu", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "slope_deg = 10.0\nthruster = true\n");
    let out = wair(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thruster"));
}

#[test]
fn missing_config_fails() {
    let out = wair(&["run", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("out");
    let out = wair(&["run", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("converged"));
    for name in ["trajectory.csv", "summary.csv", "solver.log"] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("sweep");
    let out = wair(&["sweep", "--config", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--angles", "0,5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("sweep_summary.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out_dir.join("slope_5").join("trajectory.csv").is_file());
}
