use std::path::PathBuf;
use std::process::{Command, Output};

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn dpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpa")).current_dir(models()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn proven_exits_zero() {
    let o = dpa(&["check", "ringbuffer.net", "--const", "NCELLS=5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("result: deadlock free (proven)"));
}

#[test]
fn inconclusive_exits_one_and_names_the_violation() {
    let o = dpa(&["check", "phils.net", "--pattern", "phils.pattern.json", "--oracle"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("respects_order(Phil.2) fails"), "{out}");
    assert!(out.contains("ungranted cycle Phil.0 -> Fork.1"), "{out}");
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(dpa(&["check", "missing.net"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "channel a\nP = a -> \n").unwrap();
    let o = dpa(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.net:3:"), "{err}");
    let o = dpa(&["check", "ringbuffer.net", "--pattern", "aphils.pattern.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_and_dot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let dots = dir.path().join("dots");
    let o = dpa(&[
        "check",
        "phils.net",
        "--pattern",
        "phils.pattern.json",
        "--oracle",
        "--json",
        json.to_str().unwrap(),
        "--dot-dir",
        dots.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["overall"], "inconclusive");
    assert!(!v["reasons"].as_array().unwrap().is_empty());
    for f in ["comm.dot", "residual.dot", "snapshot.dot"] {
        assert!(dots.join(f).exists(), "{f}");
    }
    let snap = std::fs::read_to_string(dots.join("snapshot.dot")).unwrap();
    assert!(snap.starts_with("digraph"));
}

#[test]
fn decompose_and_conflict() {
    let o = dpa(&["decompose", "two-ring.net"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("bridge (C0, C3): conflict-free"), "{out}");
    assert!(out.contains("subnetwork 1: {C3, C4, C5}"), "{out}");
    let o = dpa(&["conflict", "two-ring.net", "0", "C3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(dpa(&["conflict", "two-ring.net", "C0", "C9"]).status.code(), Some(2));
}

#[test]
fn pattern_and_oracle_subcommands() {
    let o = dpa(&["pattern", "leader-election.net", "leader-election.pattern.json", "--echo", "--const", "N=3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("schedule(P.0) = <P.1, P.2>"));
    let o = dpa(&["oracle", "phils.net", "--const", "N=4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("deadlock after"));
    assert_eq!(dpa(&["oracle", "aphils.net"]).status.code(), Some(0));
}

#[test]
fn bench_sweeps_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("bench.json");
    let o = Command::new(env!("CARGO_BIN_EXE_dpa"))
        .current_dir(models())
        .env("DPA_WORKERS", "2")
        .args(["bench", "aphils.net", "--sweep", "N=3,4,5", "--pattern", "aphils.pattern.json", "--oracle-max", "4"])
        .args(["--json", json.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["oracle"]["verdict"], "free");
    assert!(rows[2]["oracle"].is_null());
    let o = dpa(&["check", "ringbuffer.net", "--bench", "NCELLS=2,3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
}
