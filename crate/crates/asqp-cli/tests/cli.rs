//! End-to-end tests of the `asqp` binary: exit codes, output formats, and
//! the gen -> bench -> profile pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn asqp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asqp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_halfspace_problem(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("halfspace.json");
    std::fs::write(
        &path,
        r#"{
            "n": 2,
            "Q": [[1.0, 0.0], [0.0, 1.0]],
            "q": [0.0, 0.0],
            "G": [[-1.0, 0.0]],
            "h": [-1.0],
            "x0": [2.0, 0.0]
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn solve_prints_solution_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_halfspace_problem(dir.path());
    for scheme in ["auto", "kkt", "projection", "sphere"] {
        let out = asqp(&["solve", "halfspace.json", "--scheme", scheme], dir.path());
        assert!(out.status.success(), "scheme {scheme}: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("status      optimal"), "{text}");
        assert!(text.contains("objective   0.5"), "{text}");
        assert!(text.contains("ineq lambda 0: 1"), "{text}");
    }
}

#[test]
fn solve_json_is_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    write_halfspace_problem(dir.path());
    let out = asqp(&["solve", "halfspace.json", "--json", "--trace"], dir.path());
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["status"], "optimal");
    assert_eq!(value["x"][0], 1.0);
    assert_eq!(value["x"][1], 0.0);
    assert_eq!(value["multipliers"]["inequality"][0]["row"], 0);
    assert_eq!(value["multipliers"]["inequality"][0]["value"], 1.0);
    assert_eq!(value["trace"][0]["alpha"], 0.5);
    assert_eq!(value["trace"][0]["action"], "added row 0");
}

#[test]
fn malformed_problem_file_names_the_field_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 2, "Q": [[1.0, 0.0], [0.0]], "q": [0.0, 0.0]}"#).unwrap();
    let out = asqp(&["solve", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("field `Q[1]`"), "{}", stderr(&out));
}

#[test]
fn missing_problem_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = asqp(&["solve", "nowhere.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infeasible_start_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("infeasible.json");
    std::fs::write(
        &path,
        r#"{"n": 2, "Q": [[1.0, 0.0], [0.0, 1.0]], "q": [0.0, 0.0],
            "G": [[-1.0, 0.0]], "h": [-1.0], "x0": [0.0, 0.0]}"#,
    )
    .unwrap();
    let out = asqp(&["solve", "infeasible.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("status      infeasible_start"));
}

#[test]
fn help_and_bad_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let help = asqp(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("solve"));

    let unknown = asqp(&["frobnicate"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));

    write_halfspace_problem(dir.path());
    let bad_scheme = asqp(&["solve", "halfspace.json", "--scheme", "qr"], dir.path());
    assert_eq!(bad_scheme.status.code(), Some(1));
}

#[test]
fn bad_generator_spec_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = asqp(&["bench", "--spec", "ne=2,count=3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n"), "{}", stderr(&out));
}

#[test]
fn gen_bench_profile_pipeline() {
    let dir = tempfile::tempdir().unwrap();

    let gen = asqp(
        &["gen", "--spec", "n=6:8,ne=1,ni=3,count=2,seed=9", "--out-dir", "problems"],
        dir.path(),
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    assert!(dir.path().join("problems/p0000.json").exists());
    assert!(dir.path().join("problems/p0001.json").exists());

    let solve = asqp(&["solve", "problems/p0001.json"], dir.path());
    assert!(solve.status.success(), "{}", stderr(&solve));

    let bench = asqp(
        &[
            "bench",
            "--spec",
            "n=6:8,ne=1,ni=3,count=2,seed=9",
            "--schemes",
            "kkt,sphere",
            "--out",
            "records.csv",
        ],
        dir.path(),
    );
    assert!(bench.status.success(), "{}", stderr(&bench));
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(
        lines.next(),
        Some("problem_id,n,n_e,n_i,solver,status,iterations,wall_time_s,error_norm")
    );
    assert_eq!(lines.count(), 4); // 2 instances x 2 schemes

    let profile = asqp(
        &["profile", "--in", "records.csv", "--out", "profile.csv"],
        dir.path(),
    );
    assert!(profile.status.success(), "{}", stderr(&profile));
    let curves = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(curves.starts_with("solver,tau,rho\n"));
    assert!(curves.lines().any(|l| l.starts_with("sphere,")));
}

#[test]
fn bench_rejects_duplicate_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let out = asqp(
        &["bench", "--spec", "n=4,count=1", "--schemes", "kkt,kkt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("listed twice"));
}

#[test]
fn bench_error_norm_off_leaves_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = asqp(
        &[
            "bench",
            "--spec",
            "n=5,ni=2,count=1,seed=3",
            "--schemes",
            "kkt",
            "--error-norm",
            "off",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    let row = body.lines().nth(1).unwrap();
    assert!(row.ends_with(','), "expected empty error_norm: {row}");
}

#[test]
fn profile_rejects_malformed_records() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("records.csv"), "not,a,valid,header\n1,2,3,4\n").unwrap();
    let out = asqp(&["profile", "--in", "records.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
