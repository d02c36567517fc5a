use std::fs;
use std::process::{Command, Output};

fn kreg(args: &[&str], dir: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kreg"))
        .args(args)
        .current_dir(dir)
        .env_remove("KREG_THREADS")
        .output()
        .unwrap()
}

fn six_points(dir: &std::path::Path) {
    fs::write(
        dir.join("p.csv"),
        "x1,y\n1,100\n2,40\n3,0\n15,50\n16,50\n17,50\n",
    )
    .unwrap();
}

#[test]
fn ga_build_matches_hand_computed_rows() {
    let dir = tempfile::tempdir().unwrap();
    six_points(dir.path());
    let out = kreg(
        &["build", "--in", "p.csv", "--method", "ga", "--gamma", "2"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows,
        ["x1,y,w", "1.5,70,2", "3,0,1", "15.5,50,2", "17,50,1"]
    );
    assert!(text.starts_with("# method=g-aggregate gamma=2\n"));
}

#[test]
fn an_build_appends_empty_neighbor_centers() {
    let dir = tempfile::tempdir().unwrap();
    six_points(dir.path());
    let out = kreg(
        &[
            "build", "--in", "p.csv", "--method", "an", "--gamma", "2", "--sigma", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let xs: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(5)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(xs, ["-1", "5", "13", "19"]);
}

#[test]
fn unknown_flag_is_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    six_points(dir.path());
    let out = kreg(
        &[
            "build", "--in", "p.csv", "--method", "ga", "--bogus", "--out", "s.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn missing_size_is_usage_error_and_missing_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    six_points(dir.path());
    let out = kreg(&["build", "--in", "p.csv", "--method", "rs"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = kreg(
        &["build", "--in", "nope.csv", "--method", "rs", "--size", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn synth_writes_requested_rows_and_json_keeps_stdout_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = kreg(
        &["synth", "--n", "250", "--seed", "3", "--out", "a.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(text.lines().count(), 251);
    assert_eq!(text.lines().next(), Some("x1,y,w"));

    let out = kreg(
        &["synth", "--n", "250", "--seed", "3", "--json"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = kreg(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}
