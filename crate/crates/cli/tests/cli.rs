//! End-to-end runs of the `eigentune` binary: outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn eigentune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigentune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn validate_all_bundled() {
    let o = eigentune(&["validate"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("[ok]")).count(), 16 + 5);
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let o = eigentune(&["validate", "--scenario", "no_such_case"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_error_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"name": "z", "testbed": "zermelo", "objective": "min-energy", "bounds": {"eig_lo": 0}}"#,
    )
    .unwrap();
    let o = eigentune(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bounds"));
}

#[test]
fn replay_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = eigentune(&[
        "replay",
        "--scenario",
        "attitude_lqr_detumbling",
        "--matrices",
        "A1",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "comparison.csv", "runs.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let traj = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("trajectory_")
        })
        .count();
    assert_eq!(traj, 2);
}

#[test]
fn replay_without_matrices_is_rejected() {
    let o = eigentune(&["replay", "--scenario", "zermelo"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_dimension_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = eigentune(&[
        "replay",
        "--scenario",
        "caseA",
        "--matrices",
        "A3",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tune_one_run_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = eigentune(&[
        "tune",
        "--scenario",
        "zermelo",
        "--runs",
        "1",
        "--no-trajectories",
        "--out-dir",
        out_dir(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("mean(J(K2))-mean(J(K1))"));
}

#[test]
fn surfaces_only_for_zermelo() {
    let dir = tempfile::tempdir().unwrap();
    let o = eigentune(&["surfaces", "--scenario", "zermelo", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success());
    assert!(dir.path().join("surfaces_zermelo.csv").exists());
    let o = eigentune(&["surfaces", "--scenario", "caseC", "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
