use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn epsteer(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epsteer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("EPSTEER_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn stable_run_writes_traces_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = epsteer(&["run", "--method", "stable"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["trace_ccw_A.csv", "trace_cw_A.csv", "schedule.json", "schedule.csv", "loop.csv", "manifest.json"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let sched = read_json(&out.join("schedule.json"));
    assert_eq!(sched["method"], "stable");
    let dwells = sched["dwells"].as_array().unwrap();
    let total: f64 = dwells.iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - sched["total_time"].as_f64().unwrap()).abs() < 1e-9);

    let trace = std::fs::read_to_string(out.join("trace_ccw_A.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("j,"), "{header}");
    assert_eq!(trace.lines().count(), 1 + dwells.len() + 1);

    let report = read_json(&out.join("report.json"));
    assert!(report["ends"]["ccw_A"]["zeta_B"].as_f64().unwrap() >= 0.9);
}

#[test]
fn non_chiral_optimization_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"method": "optimize", "targets": "non_chiral"}"#);
    let out = dir.path().join("out");
    let o = epsteer(&["run", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["feasible"], true);
    for v in report["achieved"].as_object().unwrap().values() {
        assert!(v.as_f64().unwrap() >= 0.9 - 1e-9);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"method": "optimize", "targets": "non_chiral", "ga": {"population": 16, "generations": 20, "seed": 7}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(epsteer(&["run", "--config", &cfg], &a).status.success());
    assert!(epsteer(&["run", "--config", &cfg], &b).status.success());
    assert_eq!(std::fs::read(a.join("schedule.json")).unwrap(), std::fs::read(b.join("schedule.json")).unwrap());
    let (ma, mb) = (read_json(&a.join("manifest.json")), read_json(&b.join("manifest.json")));
    // effective_config carries the output directory, so it differs by design.
    let strip = |m: &Value| -> Vec<Value> {
        m["files"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|f| f["name"] != "effective_config.json")
            .cloned()
            .collect()
    };
    assert_eq!(strip(&ma), strip(&mb));
}

#[test]
fn effective_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(epsteer(&["run", "--method", "uniform", "--direction", "cw"], &out).status.success());
    let first = std::fs::read(out.join("effective_config.json")).unwrap();
    let cfg = out.join("effective_config.json").to_string_lossy().into_owned();
    assert!(epsteer(&["run", "--config", &cfg], &out).status.success());
    assert_eq!(std::fs::read(out.join("effective_config.json")).unwrap(), first);
}

#[test]
fn direction_flag_restricts_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = epsteer(&["run", "--method", "uniform", "--direction", "cw", "--mode", "B"], &out);
    assert!(o.status.success());
    assert!(out.join("trace_cw_B.csv").exists());
    assert!(!out.join("trace_ccw_B.csv").exists());
    assert!(!out.join("trace_cw_A.csv").exists());
}

#[test]
fn out_of_range_p0_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = epsteer(&["run", "--method", "stable", "--p0", "1.0"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("p0"), "{err}");
}

#[test]
fn unknown_config_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"ga": {"populaton": 10}}"#);
    let o = epsteer(&["run", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ga.populaton"));
}

#[test]
fn sheets_and_locate_eps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sheets");
    let o = epsteer(&["sheets"], &out);
    assert!(o.status.success());
    let sheets = std::fs::read_to_string(out.join("sheets.csv")).unwrap();
    assert_eq!(sheets.lines().count(), 1 + 60 * 60);

    let out = dir.path().join("eps");
    let o = epsteer(&["locate-eps"], &out);
    assert!(o.status.success());
    let eps = read_json(&out.join("eps.json"));
    let eps = eps.as_array().unwrap();
    assert_eq!(eps.len(), 1);
    assert!(eps[0]["x"].as_f64().unwrap().abs() < 1e-6);
    assert!((eps[0]["y"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}
