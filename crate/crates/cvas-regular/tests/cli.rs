//! End-to-end runs of the `cvasreg` binary: verdicts, exit codes and files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cvas_regular::instance::Instance;

const PIPELINE: &str = "dimension 3\ntransition a 1 0 0\ntransition b -1 1 0\ntransition c 0 -1 1\nsource 0 0 0\ntarget 0 1/4 1/4\n";

fn cvasreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvasreg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn member_verdicts_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "pipe.cvas", PIPELINE);
    let yes = cvasreg(&["member", &inst, "abbc", "--witness"]);
    assert_eq!(yes.status.code(), Some(0));
    let text = stdout(&yes);
    assert!(text.starts_with("member\n"), "{text}");
    assert_eq!(text.lines().count(), 5);
    let no = cvasreg(&["member", &inst, "bbc"]);
    assert_eq!(no.status.code(), Some(3));
    assert_eq!(stdout(&no), "not a member\n");
    let bad = cvasreg(&["member", &inst, "abz"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn malformed_instance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "bad.cvas", "dimension 2\ntransition a 1\n");
    let o = cvasreg(&["member", &inst, "a"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let missing = cvasreg(&["member", "/nonexistent/file", "a"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn intersect_with_regex_and_explicit_automata() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "pipe.cvas", PIPELINE);
    let re = write(dir.path(), "re.nfa", "regex a(b|c)*\n");
    let o = cvasreg(&["intersect", &inst, &re, "--witness"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("non-empty"));
    let w = lines.next().unwrap().to_owned();
    assert_eq!(cvasreg(&["member", &inst, &w]).status.code(), Some(0), "witness {w}");
    let only_b = write(dir.path(), "b.nfa", "states 1\ninitial 0\naccepting 0\nedge 0 b 0\n");
    let o = cvasreg(&["intersect", &inst, &only_b]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o), "empty\n");
}

#[test]
fn build_nfa_writes_dot_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    // A one-counter system: `a` adds, `b` removes; reach 0 from 0.
    let inst = write(
        dir.path(),
        "ab.cvas",
        "dimension 1\ntransition a 1\ntransition b -1\nsource 0\ntarget 0\n",
    );
    let dot = dir.path().join("out.dot");
    let tree = dir.path().join("tree.txt");
    let o = cvasreg(&[
        "build-nfa",
        &inst,
        "--dot",
        dot.to_str().unwrap(),
        "--dump-tree",
        tree.to_str().unwrap(),
        "--audit-len",
        "6",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    assert!(!fs::read_to_string(&tree).unwrap().is_empty());
    let capped = cvasreg(&["build-nfa", &inst, "--max-solver-steps", "1"]);
    assert_eq!(capped.status.code(), Some(2));
    let pipe = write(dir.path(), "pipe.cvas", PIPELINE);
    let capped = cvasreg(&["build-nfa", &pipe, "--max-nodes", "1", "--dump-tree"]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("root"), "partial tree is dumped");
    let bad = write(dir.path(), "bad.cvas", "dimension 1\ntransition a 1\nsource 1/0\ntarget 0\n");
    let o = cvasreg(&["build-nfa", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn lowerbound_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sigma1.cvas");
    let o = cvasreg(&["lowerbound", "1", "2", "gen", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let inst = Instance::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(inst.sys.len(), 9);
    let brute = cvasreg(&["lowerbound", "1", "2", "brute"]);
    assert_eq!(brute.status.code(), Some(0));
    assert!(stdout(&brute).contains("unique short run: (2)"));
    assert_eq!(cvasreg(&["lowerbound", "2", "2", "maxed"]).status.code(), Some(0));
    assert_eq!(cvasreg(&["lowerbound", "1", "3", "exp"]).status.code(), Some(0));
}
