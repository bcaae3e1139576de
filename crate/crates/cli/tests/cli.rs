//! End-to-end runs of the `legendre-pcg` binary.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_legendre-pcg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_prints_iterations_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"example": "example1a", "n": 320, "t1": 6, "t2": 2, "output": {:?}}}"#,
            report.to_str().unwrap()
        ),
    );
    let o = run(&["solve", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("iterations: ")).unwrap();
    let it: usize = line["iterations: ".len()..].parse().unwrap();
    assert!((5..=10).contains(&it), "{it}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["iterations"].as_u64(), Some(it as u64));
    assert_eq!(json["converged"].as_bool(), Some(true));
    assert_eq!(json["residual_history"].as_array().unwrap().len(), it + 1);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"example": "example1a", "n": 64, "tolerance": 1e-8}"#);
    let o = run(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tolerance"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), r#"{"example": "example1a", "n": 64, "kmax": 2, "t1": 0}"#);
    assert_eq!(run(&["solve", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        r#"{"coefficients": {"beta": 1, "alpha": -10000}, "dim": 1, "n": 20, "preconditioner": "none"}"#,
    );
    assert_eq!(run(&["solve", "--config", &cfg]).status.code(), Some(3));

    assert_eq!(run(&["solve", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_json_and_csv_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"coefficients": {"beta": ["exp2*one", "one*cos"]}, "dim": 2, "n": 16, "t1": [4, 3], "rhs": "random", "seed": 3}"#,
    );
    let o = run(&["solve", "--config", &cfg, "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["dim"].as_u64(), Some(2));
    let o = run(&["solve", "--config", &cfg, "--format", "csv"]);
    let out = stdout(&o);
    assert!(out.starts_with("example,d,N,t1,t2,iterations,converged,rel_residual,setup_s,iter_mean_s\n"));
    assert!(out.lines().nth(1).unwrap().contains(",2,16,4-3,0,"), "{out}");
}

#[test]
fn table_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let o = run(&[
        "table",
        "example1a",
        "--n",
        "320,640",
        "--t",
        "6:2,4:2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "example,d,N,t1,t2,iterations,converged,rel_residual,setup_s,iter_mean_s");
    assert!(lines[1].starts_with("example1a,1,320,6,2,"));
    assert!(lines[4].starts_with("example1a,1,640,4,2,"));

    let o = run(&["table", "example1a", "--n", "40", "--format", "pretty"]);
    assert!(stdout(&o).contains("N=40"));
    assert_eq!(run(&["table", "example9z"]).status.code(), Some(1));
    assert_eq!(run(&["table", "example1a", "--t", "x:1"]).status.code(), Some(1));
}

#[test]
fn bench_matvec_rows() {
    let o = run(&["bench-matvec", "--dim", "2", "--n", "16,24", "--repetitions", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "d,N,op,time_s");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("2,16,A,"));
    assert_eq!(run(&["bench-matvec", "--n", "16", "--repetitions", "2"]).status.code(), Some(1));
}

#[test]
fn rank_reproduces_mass_matrix_rows() {
    let o = run(&["rank", "--preset", "exp", "--n", "320", "--tau", "1e-6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "preset,which,N,tau,rank");
    assert!(out.lines().nth(1).unwrap().ends_with(",3"), "{out}");
    let o = run(&["rank", "--preset", "zero", "--n", "64", "--tau", "1e-6,1e-12"]);
    for line in stdout(&o).lines().skip(1) {
        assert!(line.ends_with(",0"), "{line}");
    }
    assert_eq!(run(&["rank", "--preset", "exp", "--n", "33"]).status.code(), Some(1));
    assert_eq!(
        run(&["rank", "--preset", "exp", "--n", "64", "--convention", "sideways"]).status.code(),
        Some(1)
    );
}
