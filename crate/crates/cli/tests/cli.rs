use std::fs;
use std::process::Command;

fn trifree() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trifree"));
    c.env_remove("TRIFREE_OUT_DIR");
    c
}

fn manifest(dir: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn oracle_prints_exact_rational() {
    let dir = tempfile::tempdir().unwrap();
    let st = trifree()
        .args(["oracle", "--quantity", "mu", "--n", "5", "--p", "1/5", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(manifest(dir.path())["results"]["mu"], "9071104/9765625");
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# low density\nn = 6\np = 0.1\neps = 0.2\nsamples = 4\nseed = 3\n").unwrap();
    let out = dir.path().join("out");
    let st = trifree()
        .args(["sample-low", "--config"])
        .arg(&cfg)
        .args(["--samples", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let m = manifest(&out);
    assert_eq!(m["seed"], 3);
    assert_eq!(m["results"]["samples"], 2);
    assert!(out.join("graphs/sample_00001.txt").exists());
}

#[test]
fn env_var_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let st = trifree()
        .env("TRIFREE_OUT_DIR", dir.path())
        .args(["sample-defects", "--n", "6", "--lambda", "0.5", "--samples", "2", "--out", "/nonexistent/x"])
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(manifest(dir.path())["command"], "sample-defects");
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "n = 6\nthis is not a setting\n").unwrap();
    let out = trifree().args(["sample-low", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.conf:2"));
}

#[test]
fn empty_start_slow_mix_runs() {
    let dir = tempfile::tempdir().unwrap();
    let st = trifree()
        .args(["slow-mix", "--n", "20", "--steps", "2000", "--runs", "1", "--interval", "500"])
        .args(["--control-steps", "2000", "--control-interval", "100", "--empty-start", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    assert!(dir.path().join("trace_run00.csv").exists());
}
