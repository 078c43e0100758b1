use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pdmp_core::io::{read_estimate, read_trajectory};
use pdmp_core::oracle::bench_exact_f;

fn pdmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_one_jump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = pdmp(&["simulate", "--n-jumps", "1", "--seed", "3", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("visits to A"));
    let traj = read_trajectory(&out).unwrap();
    assert_eq!(traj.records().len(), 2);
    assert_eq!(traj.seed(), 3);
}

#[test]
fn simulate_and_estimate_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let t = dir.path().join(format!("t{tag}.csv"));
        let e = dir.path().join(format!("e{tag}.csv"));
        let o = pdmp(&["simulate", "--n-jumps", "20000", "--seed", "5", "--out", path_str(&t)]);
        assert_eq!(o.status.code(), Some(0));
        let o = pdmp(&["estimate", "--input", path_str(&t), "--out", path_str(&e), "--truth"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(&t).unwrap(), fs::read(&e).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn estimate_grid_and_truth_column() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let e = dir.path().join("e.csv");
    assert_eq!(pdmp(&["simulate", "--seed", "9", "--out", path_str(&t)]).status.code(), Some(0));
    let o = pdmp(&["estimate", "--input", path_str(&t), "--out", path_str(&e), "--truth"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("cell A:"));
    let rows = read_estimate(&e).unwrap();
    assert_eq!(rows.len(), 128);
    assert_eq!(rows[0].0, 0.05);
    assert!((rows[127].0 - 0.75).abs() < 1e-15);
    for (s, f, truth) in rows {
        assert!(f.is_finite() && f >= 0.0);
        assert!((truth.unwrap() - bench_exact_f(s)).abs() <= 1e-10);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let t = dir.path().join("t.csv");
    let e = dir.path().join("e.csv");
    fs::write(
        &cfg,
        format!("n-jumps = 3000\nseed = 1\ngrid = 16\nout = {}\n", t.display()),
    )
    .unwrap();
    let o = pdmp(&["simulate", "--config", path_str(&cfg), "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = read_trajectory(&t).unwrap();
    assert_eq!((traj.n_transitions(), traj.seed()), (3000, 2));

    let o = pdmp(&[
        "estimate",
        "--config",
        path_str(&cfg),
        "--input",
        path_str(&t),
        "--out",
        path_str(&e),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&e).unwrap();
    assert!(text.starts_with("s,f_hat\n"));
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(pdmp(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(pdmp(&["simulate", "--n-jumps", "10"]).status.code(), Some(2));
    assert_eq!(pdmp(&["estimate", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(pdmp(&["simulate", "--model", "lattice", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(pdmp(&[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "no equals sign\n").unwrap();
    assert_eq!(pdmp(&["oracle", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let o = pdmp(&["simulate", "--sigma2=-1", "--out", path_str(&t)]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(&t, "i,z1,z2,z3,s,forced\n0,0,0,3.14,0,0\n1,0.1,0.1\n").unwrap();
    let e = dir.path().join("e.csv");
    let o = pdmp(&["estimate", "--input", path_str(&t), "--out", path_str(&e)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));

    // Horizon past t*(A).
    assert_eq!(pdmp(&["simulate", "--n-jumps", "2000", "--out", path_str(&t)]).status.code(), Some(0));
    let o = pdmp(&["estimate", "--input", path_str(&t), "--out", path_str(&e), "--horizon", "0.9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_checks() {
    let o = pdmp(&["oracle", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("all checks passed"));

    let o = pdmp(&["oracle", "--model", "interval", "--base-rate", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[PASS] conservation"));

    // Hazard no longer matches the closed-form density.
    let o = pdmp(&["oracle", "--base-rate", "5.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[FAIL]"));
}

#[test]
fn interval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let e = dir.path().join("e.csv");
    let common = ["--model", "interval", "--base-rate", "2"];
    let mut args = vec!["simulate", "--n-jumps", "5000", "--out", path_str(&t)];
    args.extend(common);
    assert_eq!(pdmp(&args).status.code(), Some(0));
    let mut args = vec![
        "estimate", "--input", path_str(&t), "--out", path_str(&e), "--horizon", "0.45", "--r2", "0.4",
    ];
    args.extend(common);
    let o = pdmp(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    args.push("--truth");
    assert_eq!(pdmp(&args).status.code(), Some(2));
}

#[test]
fn library_entry_point() {
    let text = pdmp_cli::run(["pdmp", "--help"]).unwrap();
    assert!(text.contains("simulate"));
    let err = pdmp_cli::run(["pdmp", "oracle", "--grid", "abc"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
