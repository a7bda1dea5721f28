use std::fs;
use std::process::Command;

fn dcpage() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dcpage"))
}

const TINY: &str = r#"
[problem]
kind = "binary"

[problem.synthetic]
n = 120
d = 6
seed = 3

[run]
methods = ["dca-page", "dca-saga"]
seeds = [0, 1]
max_iters = 1000
budget = 1500
"#;

#[test]
fn run_writes_traces_summary_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    fs::write(&config, TINY).unwrap();
    let out = dir.path().join("out");
    let run = || {
        dcpage()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap()
    };
    let first = run();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).contains("ran 4 cells, skipped 0"));
    let trace = fs::read_to_string(out.join("traces/dca-page_seed0.csv")).unwrap();
    assert!(trace.starts_with("t,grad_count,grad_evals,F,d,gap,step_norm,branch,residual"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,bucket,budget,seeds,median,q1,q3"));
    assert_eq!(summary.lines().count(), 1 + 2 * 100);
    assert!(out.join("metadata.toml").exists());

    let second = run();
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stdout).contains("ran 0 cells, skipped 4"));
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), summary);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[problem]\nkind = \"binary\"\nbogus = 1\n[run]\n").unwrap();
    let out = dcpage().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn online_baselines_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("online.toml");
    fs::write(
        &config,
        "[problem]\nkind = \"quadratic\"\n[stream]\ndim = 3\nstd = 0.5\n[run]\nmode = \"online\"\nmethods = [\"dca-svrg\"]\nmax_iters = 5\n",
    )
    .unwrap();
    let out = dcpage()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("requires a finite sum"));
}

#[test]
fn check_suites_pass() {
    let out = dcpage().args(["check", "all"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    assert_eq!(dcpage().args(["check", "nope"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn params_prints_defaults() {
    let out = dcpage()
        .args(["params", "--mode", "online", "--sigma-sq", "1", "--epsilon", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let field = |name: &str| {
        text.lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .map(str::to_string)
    };
    assert_eq!(field("b").as_deref(), Some("3600"));
    assert_eq!(field("b_small").as_deref(), Some("60"));

    let out = dcpage().args(["params", "--n", "10000", "--l-avg", "0.25"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("feasible          true"), "{text}");
}
