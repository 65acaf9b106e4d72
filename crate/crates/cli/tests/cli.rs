use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[profile]
kind = "homogeneous"
horizon = 4.0

[engine]
replicates = 150
seed = 9

[analysis]
checkpoints = [2.0, 4.0]
label_lags = [1.0]
law_fit_r = 2.0
"#;

fn vsbbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsbbm"))
        .args(args)
        .env_remove("VSBBM_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample(dir: &Path, cfg: &Path, out: &str, extra: &[&str]) -> Vec<u8> {
    let out = dir.join(out);
    let mut args = vec!["bbm-sample", "--config", s(cfg), "--out", s(&out)];
    args.extend_from_slice(extra);
    let o = vsbbm(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fs::read(out.join("records.jsonl")).unwrap()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let a = sample(dir.path(), &cfg, "a", &["--replicates", "20"]);
    let b = sample(dir.path(), &cfg, "b", &["--replicates", "20", "--threads", "3"]);
    assert_eq!(a, b);
    let c = sample(dir.path(), &cfg, "c", &["--replicates", "20", "--seed", "10"]);
    assert_ne!(a, c);
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let a = sample(dir.path(), &cfg, "a", &["--replicates", "8"]);
    let o = Command::new(env!("CARGO_BIN_EXE_vsbbm"))
        .args(["bbm-sample", "--config", s(&cfg), "--replicates", "8", "--out", s(&dir.path().join("b"))])
        .env("VSBBM_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(a, fs::read(dir.path().join("b/records.jsonl")).unwrap());
    let bad = Command::new(env!("CARGO_BIN_EXE_vsbbm"))
        .args(["bbm-sample", "--config", s(&cfg), "--out", s(&dir.path().join("c"))])
        .env("VSBBM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn zero_replicates_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let bytes = sample(dir.path(), &cfg, "a", &["--replicates", "0"]);
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 1);
    let header: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(header["header"]["replicates"], 0);
    assert_eq!(header["header"]["seed"], 9);
    assert!(header["header"]["config"].as_str().unwrap().contains("horizon = 4.0"));
}

#[test]
fn header_regenerates_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let first = sample(dir.path(), &cfg, "a", &["--replicates", "5", "--seed", "77"]);
    let line = String::from_utf8(first.clone()).unwrap().lines().next().unwrap().to_owned();
    let header: serde_json::Value = serde_json::from_str(&line).unwrap();
    let echoed = write_config(dir.path(), "echo.toml", header["header"]["config"].as_str().unwrap());
    assert_eq!(sample(dir.path(), &echoed, "b", &[]), first);
}

#[test]
fn analyze_skips_a_few_corrupt_lines() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let mut bytes = sample(dir.path(), &cfg, "a", &[]);
    bytes.extend_from_slice(b"{\"truncated\n");
    let records = dir.path().join("one_bad.jsonl");
    fs::write(&records, &bytes).unwrap();
    let out = dir.path().join("an");
    let o = vsbbm(&["analyze", s(&records), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(summary["records"], 150);
    assert_eq!(summary["corrupt_lines"], serde_json::json!([152]));
    assert!(summary["law_fit"]["sup_distance"].as_f64().unwrap() < 0.2);
    for f in ["lawfit.csv", "martingales.csv", "clusters.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    bytes.extend_from_slice(b"garbage\nmore garbage\n");
    fs::write(&records, &bytes).unwrap();
    let o = vsbbm(&["analyze", s(&records), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt"));
}

#[test]
fn analyze_reports_missing_z() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[profile]\nkind = \"plus\"\nalpha = 0.3\nhorizon = 4.0\n[engine]\nreplicates = 5\n[analysis]\ncheckpoints = [3.0]\nlaw_fit_r = 3.0\n",
    );
    sample(dir.path(), &cfg, "a", &[]);
    let o = vsbbm(&["analyze", s(&dir.path().join("a/records.jsonl")), "--out", s(&dir.path().join("an"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no record carries Z"));
}

#[test]
fn front_traces_and_summary() {
    let dir = TempDir::new().unwrap();
    let hom = write_config(
        dir.path(),
        "h.toml",
        "[profile]\nkind = \"homogeneous\"\nhorizon = 30.0\n[solver]\ndx = 0.1\n",
    );
    let minus = write_config(
        dir.path(),
        "m.toml",
        "[profile]\nkind = \"minus\"\nalpha = 0.25\nhorizon = 10.0\n[solver]\ndx = 0.1\n[analysis]\nfront_horizons = [5.0, 10.0, 20.0, 40.0]\n",
    );
    let out = dir.path().join("f");
    let o = vsbbm(&["fkpp-front", "--config", s(&hom), "--config", s(&minus), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("front_homogeneous.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "time,front,level,dx,dt,profile,alpha,horizon");
    assert_eq!(csv.lines().count(), 31);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("front_summary.json")).unwrap()).unwrap();
    let slope = summary[0]["front_fit"]["slope"].as_f64().unwrap();
    assert!((slope - 2f64.sqrt()).abs() < 0.05, "{slope}");
    assert_eq!(summary[1]["fronts"].as_array().unwrap().len(), 4);
    assert_eq!(summary[1]["log_coefficient_trend"].as_array().unwrap().len(), 3);
    assert!(out.join("front_minus_alpha0.25.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let empty = write_config(
        dir.path(),
        "e.toml",
        "[profile]\nkind = \"homogeneous\"\nhorizon = 10.0\n[analysis]\nfront_horizons = []\n",
    );
    let o = vsbbm(&["fkpp-front", "--config", s(&empty), "--out", s(&dir.path().join("f"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("front_horizons"));

    let o = vsbbm(&["acceptance", "--suite", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for suite in ["oracles", "mckean", "engineering"] {
        assert!(err.contains(suite), "{err}");
    }
}

#[test]
fn resource_cap_names_the_replicate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[profile]\nkind = \"homogeneous\"\nhorizon = 8.0\n[engine]\npruning = \"off\"\ncap = 100\nreplicates = 3\n",
    );
    let o = vsbbm(&["bbm-sample", "--config", s(&cfg), "--out", s(&dir.path().join("a"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicate"));
}
