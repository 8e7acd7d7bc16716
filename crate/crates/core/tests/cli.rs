//! The `rc-lab` binary: verbs, files and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rc_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rc-lab")).current_dir(dir).args(args).env_remove("RC_LAB_JOBS").output().unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn check_passes_on_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(dir.path(), &["check", "--config", &config("fig1-sim.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"], "pass");
    assert_eq!(v["stats"]["max_attempt_steps"], 8);
    assert!(!dir.path().join("counterexample.jsonl").exists());
}

#[test]
fn overloaded_fig2_fails_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(dir.path(), &["check", "--config", &config("fig2.json"), "--override", "budget=2"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["property"], "recoverable-wait-freedom");
    assert_eq!(v["trace_file"], "counterexample.jsonl");
    let trace = dir.path().join("counterexample.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();

    let out = rc_lab(dir.path(), &["replay", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["final_hash"], header["final_hash"]);
    assert_eq!(r["result"], "fail");
    assert_eq!(r["property"], v["property"]);
}

#[test]
fn out_flag_and_tampered_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(
        dir.path(),
        &["check", "--config", &config("fig1-sim.json"), "--override", "failure-model=independent", "--override",
          "budget=1", "--out", "agree.jsonl"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["property"], "agreement");
    let path = dir.path().join("agree.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("\"resp\":\"a\"", "\"resp\":\"b\"", 1);
    assert_ne!(tampered, text);
    std::fs::write(&path, tampered).unwrap();
    let out = rc_lab(dir.path(), &["replay", "--trace", "agree.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"], "diverged");
    std::fs::write(&path, "not a trace\n").unwrap();
    assert_eq!(rc_lab(dir.path(), &["replay", "--trace", "agree.jsonl"]).status.code(), Some(65));
}

#[test]
fn valency_writes_dot_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(dir.path(), &["valency", "--config", &config("fig3-valency.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["root"], "bivalent");
    assert_eq!(v["extended_model"], true);
    assert!(v["bivalent_count"].as_u64().unwrap() > 0);
    assert!(!v["crash_decision_edges"].as_array().unwrap().is_empty());
    let dot = std::fs::read_to_string(dir.path().join("valency.dot")).unwrap();
    assert!(dot.starts_with("digraph valency {"));
}

#[test]
fn fuzz_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(dir.path(), &["fuzz", "--config", &config("fig2-fuzz.json"), "--override", "episodes=200", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["stats"]["episodes"], 200);
    let out = rc_lab(dir.path(), &["bound", "--config", &config("fig2.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["bound"]["B"], 12);
    assert_eq!(v["observed_max"], 12);
    assert_eq!(v["certified"], true);
}

#[test]
fn scripted_and_depth_limited_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = rc_lab(dir.path(), &["check", "--config", &config("fig1-scripted.json")]);
    assert_eq!(out.status.code(), Some(0));
    let out = rc_lab(dir.path(), &["check", "--config", &config("fig2.json"), "--depth", "4"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["depth_limit"], 4);
}

#[test]
fn jobs_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rc-lab"))
        .current_dir(dir.path())
        .args(["check", "--config", &config("cas-rc.json")])
        .env("RC_LAB_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(json(&out)["jobs"], 3);
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rc_lab(dir.path(), &[]).status.code(), Some(64));
    assert_eq!(rc_lab(dir.path(), &["explode"]).status.code(), Some(64));
    assert_eq!(rc_lab(dir.path(), &["check", "--frobnicate"]).status.code(), Some(64));
    assert_eq!(rc_lab(dir.path(), &["check", "--jobs", "many"]).status.code(), Some(64));
    assert_eq!(rc_lab(dir.path(), &["help"]).status.code(), Some(64));
    assert_eq!(rc_lab(dir.path(), &["--help"]).status.code(), Some(0));
    let bad = rc_lab(dir.path(), &["check", "--config", &config("fig2.json"), "--override", "n=3"]);
    assert_eq!(bad.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("proposals"));
    let missing = rc_lab(dir.path(), &["check", "--config", "nowhere.json"]);
    assert_eq!(missing.status.code(), Some(65));
}
