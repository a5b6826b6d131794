use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn contactqsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contactqsd"))
        .args(args)
        .env_remove("CONTACTQSD_WORKERS")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("contactqsd-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.lines().last().unwrap()).expect("error is JSON");
    v["error"]["kind"].as_str().unwrap().to_owned()
}

#[test]
fn exact_two_state_example() {
    let out = contactqsd(&["exact", "--lambda", "1", "--W", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let alpha = v["result"]["alpha"].as_f64().unwrap();
    assert!((alpha - (5.0 - 17f64.sqrt()) / 2.0).abs() < 1e-10);
    assert_eq!(v["result"]["n_states"], 2);
    assert_eq!(v["manifest"]["subcommand"], "exact");
}

#[test]
fn exact_export_round_trip() {
    let dir = scratch("export");
    let prefix = dir.join("w4");
    let out = contactqsd(&["exact", "--lambda", "0.8", "--W", "4", "--export-prefix", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let coo = std::fs::read_to_string(dir.join("w4.coo")).unwrap();
    let states = std::fs::read_to_string(dir.join("w4.states")).unwrap();
    assert_eq!(states.lines().filter(|l| !l.starts_with('#')).count(), 8);
    assert!(coo.lines().filter(|l| !l.starts_with('#')).count() > 8);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["yaglom", "--t", "2"][..],
        &["yaglom", "--lambda", "1", "--t", "2", "--bogus"],
        &["exact", "--lambda", "1", "--W", "40"],
        &["structures", "--lambda", "1", "--t", "6", "--window-margin", "0"],
        &["yaglom", "--lambda", "-1", "--t", "2"],
    ] {
        let out = contactqsd(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!error_kind(&out).is_empty());
    }
}

#[test]
fn degenerate_sample_exits_3() {
    let out = contactqsd(&["yaglom", "--lambda", "0", "--t", "30", "--replicas", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "degenerate-sample");
}

#[test]
fn yaglom_summary_independent_of_workers() {
    let base = ["yaglom", "--lambda", "1", "--t", "3", "--eta0", "0;1", "--replicas", "4000", "--seed", "12"];
    let one = contactqsd(&[&base[..], &["--workers", "1"]].concat());
    let four = contactqsd(&[&base[..], &["--workers", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert!(stdout_json(&one)["manifest"]["spec"].get("workers").is_none());
}

#[test]
fn config_file_supplies_defaults_and_rejects_unknown_keys() {
    let dir = scratch("config");
    let good = dir.join("good.json");
    std::fs::write(&good, r#"{"lambda": 1.0, "W": 3, "top": 2}"#).unwrap();
    let out = contactqsd(&["exact", "--config", good.to_str().unwrap(), "--W", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["result"]["W"], 4);
    assert_eq!(v["manifest"]["spec"]["lambda"], 1.0);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"lambda": 1.0, "lamda": 2.0}"#).unwrap();
    let out = contactqsd(&["exact", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_manifest_reruns_and_detects_tampering() {
    let dir = scratch("verify");
    let summary = dir.join("s.json");
    let out = contactqsd(&[
        "yaglom", "--lambda", "0.9", "--t", "2", "--replicas", "2000", "--seed", "4", "--out",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("s.json.timing.json").exists());
    let out = contactqsd(&["yaglom", "--verify-manifest", summary.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let text = std::fs::read_to_string(&summary).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["result"]["survivors"] = Value::from(1);
    std::fs::write(&summary, serde_json::to_string_pretty(&v).unwrap() + "\n").unwrap();
    let out = contactqsd(&["yaglom", "--verify-manifest", summary.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn selftest_passes() {
    let out = contactqsd(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_0() {
    assert_eq!(contactqsd(&["--help"]).status.code(), Some(0));
    assert_eq!(contactqsd(&["yaglom", "--help"]).status.code(), Some(0));
}
