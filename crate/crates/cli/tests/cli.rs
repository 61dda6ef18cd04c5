use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qradar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qradar"))
        .args(args)
        .env_remove("QRADAR_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn preset_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = qradar(&[
        "run",
        "--preset",
        "eom_temperature",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["kind"], "eom_sweep");
    assert_eq!(s["outputs"][0], "sweep.csv");
    assert!(s["inputs"].get("parallelism").is_none());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("temperature_k,lambda_sph_oc_mc"));
    let t = s["results"]["threshold"]["kelvin"].as_f64().unwrap();
    assert!((t - 0.81665).abs() < 2e-3, "{t}");
}

#[test]
fn config_hash_matches_git() {
    let dir = tempfile::tempdir().unwrap();
    let text = qradar_cli::presets::scenario("channel_neff").unwrap();
    let path = write(dir.path(), "c.json", text);
    let out = dir.path().join("out");
    assert!(
        qradar(&["run", &path, "--output-dir", out.to_str().unwrap()])
            .status
            .success()
    );
    let hash = summary(&out)["config_hash"].as_str().unwrap().to_owned();
    match Command::new("git").args(["hash-object", &path]).output() {
        Ok(g) if g.status.success() => assert_eq!(String::from_utf8_lossy(&g.stdout).trim(), hash),
        _ => assert_eq!(hash, qradar_cli::run::git_blob_hash(text.as_bytes())),
    }
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"format_version": 1, "kind": "qi_roc", "parameters": {"reflectivty": 0.5, "n_background": -1}}"#,
    );
    let o = qradar(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("reflectivity"), "{err}");
    assert!(err.contains("n_background"), "{err}");

    let syntax = write(dir.path(), "syntax.json", "{\n  \"kind\": \n}");
    let o = qradar(&["validate", &syntax]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    assert_eq!(
        qradar(&["run", "--preset", "eom_temprature"]).status.code(),
        Some(1)
    );
    assert_eq!(qradar(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        qradar(&["run", "--preset", "qi_roc", "--parallelism", "0"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn unstable_operating_point_exits_two_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "unstable.json",
        r#"{"format_version": 1, "kind": "oe_sweep",
            "parameters": {"axis": "temperature_k", "grid": [0.03],
                           "model": {"delta_eg_rad_s": 0.0}}}"#,
    );
    let out = dir.path().join("out");
    let o = qradar(&["run", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["error"]["class"], "numerical");
}

#[test]
fn qi_summary_matches_roc_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "qi.json",
        r#"{"format_version": 1, "kind": "qi_roc", "seed": 5,
            "parameters": {"signal_photons": 0.1, "reflectivity": 0.5, "n_background": 1,
                           "samples_per_decision": 200, "n_decisions": 400}}"#,
    );
    let out = dir.path().join("out");
    assert!(
        qradar(&["run", &cfg, "--output-dir", out.to_str().unwrap()])
            .status
            .success()
    );
    let s = summary(&out);
    for (file, key) in [("roc_qi.csv", "auc_qi"), ("roc_ci.csv", "auc_ci")] {
        let rows: Vec<(f64, f64)> = std::fs::read_to_string(out.join(file))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let c: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
                (c[1], c[2])
            })
            .collect();
        let auc: f64 = rows
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
            .sum();
        assert!((auc - s["results"][key].as_f64().unwrap()).abs() < 1e-12);
        assert_eq!(rows.first().unwrap(), &(0.0, 0.0));
        assert_eq!(rows.last().unwrap(), &(1.0, 1.0));
    }
}

#[test]
fn presets_list_and_show() {
    let o = qradar(&["presets", "list"]);
    assert!(o.status.success());
    let list = String::from_utf8_lossy(&o.stdout);
    assert!(list.contains("oe_link") && list.contains("quantum_limited_amp"));
    assert!(!list.contains("invalid"));
    let o = qradar(&["presets", "show", "fig10_target"]);
    assert!(o.status.success());
    let o = qradar(&["presets", "show", "qi_rok"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("qi_roc"));
}
