use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seaobs::cli::Preset;
use seaobs::io::{read_trace, RunManifest};

fn seaobs(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seaobs"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OBSERVER_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_defaults_reports_sigma() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{}").unwrap();
    let o = seaobs(&["validate", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"sigma\": 0.99986331"));
}

#[test]
fn validate_rejects_weak_gains() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"gains": [0.4, 50, 50]}"#).unwrap();
    let o = seaobs(&["validate", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unstable_discretization_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gains": [250, 250, 250], "dt": 0.1}"#,
    )
    .unwrap();
    let o = seaobs(&["run", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("24.99"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"dt": "fast"}"#).unwrap();
    assert_eq!(seaobs(&["run", "bad.json"], dir.path()).status.code(), Some(1));
    assert_eq!(
        seaobs(&["run", "missing.json"], dir.path()).status.code(),
        Some(1)
    );
    fs::write(dir.path().join("ok.json"), "{}").unwrap();
    let o = seaobs(&["run", "ok.json", "--override", "nope=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn preset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "preset",
        "severe-table3",
        "--seed",
        "7",
        "--override",
        "duration=20",
    ];
    let mut files = Vec::new();
    for out in ["a", "b"] {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        let o = seaobs(&a, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(fs::read(dir.path().join(out).join("severe-table3/trace.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(read_trace(files[0].as_slice()).unwrap().len(), 2001);
}

#[test]
fn seed_env_fallback_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"duration": 2}"#).unwrap();
    seaobs(&["run", "c.json", "--seed", "11", "--out", "flag"], dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_seaobs"))
        .args(["run", "c.json", "--out", "env"])
        .current_dir(dir.path())
        .env("OBSERVER_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |d: &str| fs::read(dir.path().join(d).join("trace.csv")).unwrap();
    assert_eq!(read("flag"), read("env"));
}

#[test]
fn manifest_reruns_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"duration": 3, "environment": {"noise_enabled": true}}"#,
    )
    .unwrap();
    assert!(seaobs(
        &[
            "run",
            "c.json",
            "--seed",
            "5",
            "--decimation",
            "2",
            "--out",
            "first"
        ],
        dir.path()
    )
    .status
    .success());
    let manifest_text = fs::read_to_string(dir.path().join("first/manifest.json")).unwrap();
    let manifest = RunManifest::from_json(&manifest_text).unwrap();
    assert_eq!(manifest.config.measurement_decimation, 2);
    assert_eq!(manifest.version, env!("CARGO_PKG_VERSION"));
    assert!(
        seaobs(&["run", "first/manifest.json", "--out", "second"], dir.path())
            .status
            .success()
    );
    let read = |d: &str| fs::read(dir.path().join(d).join("trace.csv")).unwrap();
    assert_eq!(read("first"), read("second"));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("second/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["records"], 301);
}

#[test]
fn zero_duration_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"duration": 0}"#).unwrap();
    assert!(seaobs(&["run", "c.json"], dir.path()).status.success());
    let trace = read_trace(fs::File::open(dir.path().join("out/trace.csv")).unwrap()).unwrap();
    assert_eq!(trace.len(), 1);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/metrics.json")).unwrap()).unwrap();
    assert!(metrics["mean_abs_relative_error"][0].is_null());
}

#[test]
fn derive_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = seaobs(&["derive"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["sigma"].as_f64().unwrap() - 0.9998633).abs() < 1e-7);
    assert!(v["ball_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn study_presets_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    for (name, sub) in [
        ("gamma-fig8", "gamma-30/trace.csv"),
        ("q-sweep-fig6", "q-100000/trace.csv"),
        ("trajectory-fig1", "without-noise/trace.csv"),
    ] {
        let o = seaobs(&["preset", name, "--override", "duration=15"], dir.path());
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(dir.path().join("out").join(name).join("summary.json").exists());
        assert!(
            dir.path().join("out").join(name).join(sub).exists(),
            "{name}/{sub}"
        );
    }
}

#[test]
fn presets_carry_reference_values() {
    for p in [Preset::SevereTable3, Preset::StochasticFig5] {
        let json: serde_json::Value = serde_json::from_str(&p.config().to_json().unwrap()).unwrap();
        assert_eq!(json["environment"]["wind_force"], 10000.0);
        assert_eq!(json["environment"]["gamma_current_deg"], 300.0);
        assert_eq!(json["gains"], serde_json::json!([50.0, 50.0, 50.0]));
        assert_eq!(json["dt"], 0.01);
        assert_eq!(json["initial_pose"]["psi_deg"], 30.0);
    }
    assert!(!Preset::SevereTable3.config().environment.noise_enabled);
    assert!(Preset::StochasticFig5.config().environment.noise_enabled);
}
