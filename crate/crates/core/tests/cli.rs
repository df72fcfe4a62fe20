use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn hykeep(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hykeep")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !k.ends_with("_ms") && k != "timings");
            m.values_mut().for_each(strip_timings);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

fn report(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    strip_timings(&mut v);
    v
}

#[test]
fn exit_codes() {
    assert_eq!(hykeep(&["model"]).0, 0);
    assert_eq!(hykeep(&["no-such-command"]).0, 64);
    assert_eq!(hykeep(&["--box", "d=[oops]", "safety"]).0, 64);
    assert_eq!(hykeep(&["safety"]).0, 0);
    // an empty budget leaves the verdict open
    assert_eq!(hykeep(&["--budget", "0", "reach"]).0, 2);
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        vec!["safety"],
        vec!["darboux"],
        vec!["simulate", "--random", "5"],
        vec!["singular", "--horizon", "5"],
    ] {
        let mut reports = Vec::new();
        for k in 0..2 {
            let path = dir.path().join(format!("{}-{k}.json", cmd[0]));
            let mut args = vec!["--seed", "3", "--json", path.to_str().unwrap()];
            args.extend(&cmd);
            let (code, _) = hykeep(&args);
            assert_eq!(code, 0, "{cmd:?}");
            reports.push(report(&path));
        }
        assert_eq!(reports[0], reports[1], "{cmd:?}");
        assert_eq!(reports[0]["command"], cmd[0]);
        assert_eq!(reports[0]["model_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn simulate_writes_csv_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let ev = dir.path().join("e.json");
    let (code, _) = hykeep(&[
        "simulate",
        "--phi",
        "3.14159",
        "--d",
        "3",
        "--horizon",
        "10",
        "--csv",
        csv.to_str().unwrap(),
        "--events",
        ev.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("t,g,h,e,d,phi,mode,V,region\n"));
    assert!(body.lines().count() > 100);
    let events: Value = serde_json::from_str(&std::fs::read_to_string(&ev).unwrap()).unwrap();
    assert!(events["events"].is_array());
}
