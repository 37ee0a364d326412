use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn galloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_galloc")).args(args).env_remove("GALLOC_LIMIT").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, out: &Output) -> PathBuf {
    assert!(out.status.success(), "stderr: {}", stderr(out));
    let path = dir.path().join(name);
    std::fs::write(&path, &out.stdout).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn appendix(dir: &TempDir) -> PathBuf {
    write(dir, "appendix.json", &galloc(&["gen", "--appendix", "4"]))
}

#[test]
fn solve_output_is_accepted_by_check() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "g.json", &galloc(&["gen", "--seed", "7", "--b-cap", "2", "--opposed"]));
    for mode in ["min", "max"] {
        let sol = write(&dir, "x.json", &galloc(&["solve", s(&inst), "--mode", mode, "--verify"]));
        let report: Value = serde_json::from_slice(&std::fs::read(&sol).unwrap()).unwrap();
        assert_eq!(report["result"]["verify"]["checked"], true);
        let check = json(&galloc(&["check", s(&inst), s(&sol)]));
        assert_eq!(check["result"]["stable"], true, "{check}");
    }
}

#[test]
fn report_carries_digest_and_consistent_call_counts() {
    let dir = TempDir::new().unwrap();
    let inst = appendix(&dir);
    let a = json(&galloc(&["solve", s(&inst)]));
    let b = json(&galloc(&["route", s(&inst)]));
    assert_eq!(a["instance_digest"], b["instance_digest"]);
    assert_eq!(a["instance_digest"].as_str().unwrap().len(), 64);
    let sum: u64 = a["oracle_calls"].as_array().unwrap().iter().map(|c| c["calls"].as_u64().unwrap()).sum();
    assert_eq!(a["oracle_calls_total"].as_u64().unwrap(), sum);
}

#[test]
fn poset_without_general_flag_reports_gapless_violation() {
    let dir = TempDir::new().unwrap();
    let inst = appendix(&dir);
    let out = galloc(&["poset", s(&inst)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("gapless"), "{}", stderr(&out));

    let general = json(&galloc(&["poset", s(&inst), "--general", "--verify"]));
    assert_eq!(general["result"]["verify"]["stable_count"], 5);
}

#[test]
fn brute_respects_limit_flag_and_env() {
    let dir = TempDir::new().unwrap();
    let inst = appendix(&dir);
    let out = galloc(&["brute", s(&inst), "--limit", "100"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("enumeration limit exceeded"));

    let out = Command::new(env!("CARGO_BIN_EXE_galloc"))
        .args(["brute", s(&inst)])
        .env("GALLOC_LIMIT", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let report = json(&galloc(&["brute", s(&inst)]));
    assert_eq!(report["result"]["stable_count"], 5);
    assert_eq!(report["result"]["properties"]["distributive"], true);
}

#[test]
fn rotations_and_dot() {
    let dir = TempDir::new().unwrap();
    let inst = appendix(&dir);
    let x = write(&dir, "x.json", &galloc(&["solve", s(&inst)]));
    let rots = json(&galloc(&["rotations", s(&inst), s(&x)]));
    let list = rots["result"]["rotations"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["tau"], 1);

    let dot = galloc(&["rotations", s(&inst), s(&x), "--dot"]);
    assert!(String::from_utf8(dot.stdout).unwrap().starts_with("digraph"));
}

#[test]
fn mincost_on_gapless_instance() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "g.json", &galloc(&["gen", "--seed", "2", "--b-cap", "2", "--opposed", "--fixed-quota"]));
    let spec: Value = serde_json::from_slice(&std::fs::read(&inst).unwrap()).unwrap();
    let costs: serde_json::Map<String, Value> =
        spec["edges"].as_array().unwrap().iter().map(|e| (e["id"].as_str().unwrap().to_string(), Value::from(1))).collect();
    let cpath = dir.path().join("costs.json");
    std::fs::write(&cpath, Value::Object(costs).to_string()).unwrap();
    let out = json(&galloc(&["mincost", s(&inst), s(&cpath)]));
    assert_eq!(out["result"]["stable"], true);
    assert!(out["result"]["cost"].is_string());
}

#[test]
fn malformed_input_and_usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"workers\": 3}").unwrap();
    assert_eq!(galloc(&["solve", s(&bad)]).status.code(), Some(1));
    assert_eq!(galloc(&["solve"]).status.code(), Some(1));
    assert_eq!(galloc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(galloc(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_lists_phases() {
    let dir = TempDir::new().unwrap();
    let inst = appendix(&dir);
    let out = json(&galloc(&["bench", s(&inst)]));
    let phases: Vec<&str> =
        out["result"]["phases"].as_array().unwrap().iter().map(|p| p["phase"].as_str().unwrap()).collect();
    assert_eq!(phases, ["iteration", "stage1+stage2", "full route", "general poset"]);
}
