use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htetro-sim"))
        .args(args)
        .env("HTETRO_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

#[test]
fn unknown_shape_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--shape", "Q"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "schema_version = 7\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--shape", "T"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let shape_dir = dir.path().join("T");
    for f in [
        "trajectory.csv",
        "steering.csv",
        "saturation_events.csv",
        "summary.json",
        "path.svg",
        "steering.svg",
        "residual.svg",
    ] {
        assert!(shape_dir.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(shape_dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,theta,x_d,y_d,theta_d,gamma_d,R_d,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(shape_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], true);
}

#[test]
fn waypoint_csv_and_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let wp = dir.path().join("wp.csv");
    std::fs::write(&wp, "x,y,theta\n40,0,0\n").unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "schema_version = 1\n[sim]\nmax_time_s = 2.0\n").unwrap();
    let out = run(
        &["simulate", "--shape", "O", "--config", cfg.to_str().unwrap(), "--waypoints", wp.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn audit_of_collinear_shape_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["audit", "--shape", "I", "--iterations", "50"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn perturbed_audit_fails_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["audit", "--shape", "L", "--iterations", "5", "--perturb", "0.05"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let sample = dir.path().join("audit_failure.json");
    assert!(sample.is_file());
    let again = run(&["audit", "--replay", sample.to_str().unwrap()], dir.path());
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stdout).contains("FAIL Concurrency"));
}
