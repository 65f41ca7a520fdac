//! The `safevi` binary end to end.

use std::process::{Command, Output};

fn safevi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safevi")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = safevi(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn counter_eval_prints_eight_pairs() {
    let text = stdout(&["counter-eval", "--p", "0.7", "--gamma", "0.95"]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 10);
    let max: f64 = rows[9].strip_prefix("max_deviation\t").unwrap().parse().unwrap();
    assert!(max < 1e-10);
    assert!(text.contains("P_LL\t0.886075949\t0.886075949"));
}

#[test]
fn pi_trace_reproduces_table_one() {
    let text = stdout(&["pi-trace", "--mode", "naive", "--p", "0.7", "--theta", "0.85", "--gamma", "0.95", "--init-policy", "R"]);
    let rows: Vec<Vec<&str>> = text.lines().take(5).map(|l| l.split('\t').collect()).collect();
    let expected = [
        ("s1=R,s2=R", "true", "0.82"),
        ("s1=L,s2=R", "false", "0.89"),
        ("s1=R,s2=R", "true", "0.82"),
        ("s1=L,s2=R", "false", "0.89"),
        ("s1=R,s2=R", "true", "0.82"),
    ];
    for (i, (row, (policy, c_l, p_l))) in rows.iter().zip(expected).enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        assert_eq!(row[1], policy);
        assert_eq!(row[2], format!("constraint:L={c_l}"));
        assert_eq!(row[3], "constraint:R=true");
        let p: f64 = row[4].strip_prefix("P:L=").unwrap().parse().unwrap();
        assert_eq!(format!("{p:.2}"), p_l);
    }
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("recursive.csv");
    let p = path.to_str().unwrap();
    stdout(&["sweep", "--mode", "recursive", "--env", "cliff", "--thetas", "0:1:0.1", "--out", p]);
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("threshold,P-values-true,P-values-est,V-values-true,V-values-est"));
    let thetas: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(thetas, ["0", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9"]);
}

#[test]
fn env_dump_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cliff.mdp");
    let p = path.to_str().unwrap();
    stdout(&["env", "dump", "--env", "cliff", "--out", p]);
    let via_file = stdout(&["vi", "--mdp", p, "--start", "r2c0", "--theta", "0.3"]);
    let built_in = stdout(&["vi", "--env", "cliff", "--theta", "0.3"]);
    assert_eq!(via_file, built_in);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# naive at a tight threshold\nmode = naive\ntheta = 0.5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_cfg = stdout(&["vi", "--config", c]);
    assert_eq!(from_cfg, stdout(&["vi", "--mode", "naive", "--theta", "0.5"]));
    // Explicit flags win over the file.
    let overridden = stdout(&["vi", "--config", c, "--theta", "0.95"]);
    assert!(overridden.contains("theta\t0.95"));
}

#[test]
fn check_reports_vacuity_and_witnesses() {
    let text = stdout(&["check", "--props", "p1,p2,p4", "--theta", "0.85", "--candidate", "R"]);
    assert!(text.contains("not an assumed optimal policy"));
    assert!(text.contains("P1:safety\tpass (vacuous)"));
    assert!(text.lines().any(|l| l.starts_with("P4\tFAIL\tstate=s1")));
}

#[test]
fn exit_codes() {
    assert_eq!(safevi(&["vi", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(safevi(&["sweep", "--mode", "sideways"]).status.code(), Some(2));
    let domain = safevi(&["vi", "--theta", "1.0"]);
    assert_eq!(domain.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&domain.stderr).contains("theta = 1 outside [0, 1)"));
    assert_eq!(safevi(&["vi", "--env", "cliff", "--start", "nowhere"]).status.code(), Some(1));
    assert_eq!(safevi(&["check", "--props", "p9"]).status.code(), Some(1));
}
