use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ibnn::harness::config::{ExperimentConfig, Task};
use ibnn::harness::output::{read_csv, read_manifest, RESULTS_HEADER};

fn ibnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibnn")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn preset_prints_a_loadable_config() {
    for task in Task::ALL {
        let out = ibnn(&["preset", task.name()]);
        assert!(out.status.success());
        let cfg = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(cfg, ExperimentConfig::preset(task));
    }
    assert!(!ibnn(&["preset", "nonsense"]).status.success());
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.json", r#"{"schema_version":1,"task":"regression_uq","typo":1}"#),
        ("version.json", r#"{"schema_version":99,"task":"regression_uq"}"#),
        ("alpha.json", r#"{"schema_version":1,"task":"regression_uq","alphas":[1.5]}"#),
        ("syntax.json", "{"),
    ];
    for (name, body) in cases {
        let cfg = write(dir.path(), name, body);
        let out = ibnn(&["uq", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{name}");
    }
    // Nothing was trained or written.
    assert!(!dir.path().join("o").exists());

    // The control task is not an uncertainty experiment, and vice versa.
    let glu = write(dir.path(), "g.json", r#"{"schema_version":1,"task":"glucose_control"}"#);
    assert_eq!(ibnn(&["uq", "--config", &glu]).status.code(), Some(2));
    let reg = write(dir.path(), "r.json", r#"{"schema_version":1,"task":"regression_uq"}"#);
    assert_eq!(ibnn(&["control", "--config", &reg]).status.code(), Some(2));
}

#[test]
fn uq_writes_results_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cls.json",
        r#"{"schema_version":1,"task":"classification_uq","seeds":[0,1],"severities":[1,3,5],
            "sizes":{"train":80,"test":15},"train":{"epochs":15}}"#,
    );
    let out_dir = dir.path().join("run");
    let out = ibnn(&["uq", "--config", &cfg, "--alpha", "0.2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = read_manifest(&out_dir).unwrap();
    assert_eq!(manifest.task, Task::ClassificationUq);
    assert_eq!(manifest.seeds, vec![0, 1]);
    assert_eq!(manifest.config.alphas, vec![0.2]);
    assert_eq!(manifest.config_hash, manifest.config.hash().unwrap());
    assert!(manifest.failed_cells.is_empty());
    for f in &manifest.files {
        assert!(out_dir.join(f).exists(), "{f}");
    }

    let (header, rows) = read_csv(&out_dir.join("results.csv")).unwrap();
    assert_eq!(header, RESULTS_HEADER);
    // Per seed and severity: one AU/EU row and one coverage row per model.
    assert_eq!(rows.len(), 2 * 3 * 2 * 2);
    // One abstention decision per query, none dropped.
    let (_, abst) = read_csv(&out_dir.join("abstentions.csv")).unwrap();
    assert_eq!(abst.len(), 2 * 3 * 15);

    let report = ibnn(&["report", "--out", out_dir.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("classification_uq.severity_5"));
    let (_, summary) = read_csv(&out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.len(), rows.len() / 2);
}

#[test]
fn train_then_predict_classification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cls.json",
        r#"{"schema_version":1,"task":"classification_uq","sizes":{"train":60,"test":10},"train":{"epochs":10}}"#,
    );
    let out_dir = dir.path().join("model");
    let o = out_dir.to_str().unwrap();
    assert!(ibnn(&["train", "--config", &cfg, "--seed", "2", "--out", o]).status.success());
    let inputs = write(dir.path(), "x.csv", "a,b\n0.1,0.2\n1.0,-0.4\n");
    let out = ibnn(&["predict", "--config", &cfg, "--out", o, "--inputs", &inputs, "--alpha", "0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("predictions.csv")).unwrap();
    assert_eq!(header, ["query", "alpha", "model", "labels", "min_mass"]);
    assert_eq!(rows.len(), 2 * 2);
    for r in rows.iter().filter(|r| r[2] == "ibnn") {
        assert!(r[4].parse::<f64>().unwrap() >= 0.95);
    }

    // Inputs of the wrong width are rejected.
    let bad = write(dir.path(), "bad.csv", "a\n0.1\n");
    let out = ibnn(&["predict", "--config", &cfg, "--out", o, "--inputs", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}
