use std::path::Path;
use std::process::{Command, Output};

use circlaw::experiments::{read_records, Summary};
use tempfile::TempDir;

fn circlaw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circlaw"))
        .args(args)
        .env("CIRCLAW_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sample_run_persists_records_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = circlaw(&["sample", "--n", "12", "--s", "4", "--trials", "5", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("experiment sample: 5 records"));
    let records = read_records(&dir.path().join("sample.ndjson")).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.iter().enumerate().all(|(i, r)| r.trial == i && r.params.n == 12));
    let text = std::fs::read_to_string(dir.path().join("sample.summary.json")).unwrap();
    let persisted: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(persisted, Summary::from_records(&records));
    assert!(persisted.passed());
}

#[test]
fn reruns_with_the_same_seed_reproduce_statistics() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["logdet-compare", "--n", "16", "--s", "1", "--trials", "3", "--seed", "9", "--z", "1+0.5i,-0.5-1i"];
    assert!(circlaw(&args, a.path()).status.success());
    assert!(circlaw(&args, b.path()).status.success());
    let ra = read_records(&a.path().join("logdet-compare.ndjson")).unwrap();
    let rb = read_records(&b.path().join("logdet-compare.ndjson")).unwrap();
    assert_eq!(ra.len(), 3);
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.stats, y.stats);
        assert_eq!(x.flags, y.flags);
    }
}

#[test]
fn config_file_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "reduce", "n": 8, "s": 2, "trials": 2, "seed": 5}"#).unwrap();
    let o = circlaw(&["reduce", "--config", cfg.to_str().unwrap(), "--trials", "4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let records = read_records(&dir.path().join("reduce.ndjson")).unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(records[0].params.n, 8);

    let o = circlaw(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_records(&dir.path().join("reduce.ndjson")).unwrap().len(), 2);

    let o = circlaw(&["esd", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["no-such-command"],
        vec!["sample", "--n", "ten"],
        vec!["sample", "--n", "10", "--s", "3"],
        vec!["logdet-compare", "--n", "10", "--s", "10"],
        vec!["talagrand", "--model", "sideways"],
    ] {
        let o = circlaw(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"experiment": "sample", "colour": 1}"#).unwrap();
    let o = circlaw(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_records_file_is_an_error() {
    let dir = TempDir::new().unwrap();
    let o = circlaw(&["export"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn esd_export_naming() {
    let dir = TempDir::new().unwrap();
    let o = circlaw(&["esd", "--n", "20", "--s", "4", "--trials", "2", "--seed", "1", "--grid", "21"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("esd_eigenvalues_0.csv").exists());
    assert!(dir.path().join("esd_eigenvalues_1.csv").exists());

    let o = circlaw(&["export"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["figure1_0.csv", "figure1_1.csv", "figure1.meta.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("figure1_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines.len() >= 20, "{} lines", lines.len());

    let one = TempDir::new().unwrap();
    let o = circlaw(&["esd", "--n", "20", "--s", "4", "--trials", "1", "--grid", "21"], one.path());
    assert!(o.status.success());
    let o = circlaw(&["export", "--stem", "single"], one.path());
    assert!(o.status.success());
    assert!(one.path().join("single.csv").exists());
    assert!(!one.path().join("single_0.csv").exists());

    let empty = TempDir::new().unwrap();
    std::fs::write(empty.path().join("esd.ndjson"), "").unwrap();
    let o = circlaw(&["export"], empty.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let header = std::fs::read_to_string(empty.path().join("figure1.csv")).unwrap();
    assert_eq!(header.lines().count(), 1);
}
