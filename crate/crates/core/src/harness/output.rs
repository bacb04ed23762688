//! CSV and manifest writers. Floats are printed in Rust's shortest
//! round-trip form, so identical outcomes give identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::PerfDiff;
use crate::harness::config::{ExperimentConfig, Task, SCHEMA_VERSION};
use crate::harness::run::{mean_perf_diff, ExperimentOutcome, FailedCell};

pub const MANIFEST_FORMAT: &str = "ibnn.manifest";
pub const MANIFEST_VERSION: u32 = 1;

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn perf(p: &PerfDiff) -> String {
    match p {
        PerfDiff::Defined(v) => num(*v),
        PerfDiff::Undefined => "undefined".into(),
    }
}

fn joined<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Writes a header and rows to `path`.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

pub const RESULTS_HEADER: [&str; 9] = [
    "experiment_id",
    "alpha",
    "model",
    "one_step",
    "multi_step",
    "mean_width",
    "au",
    "eu",
    "seed",
];

pub const CONTROL_HEADER: [&str; 6] = ["seed", "alpha", "episodes", "t_unsafe_ibnn", "t_unsafe_ebnn", "perf_diff"];

/// Provenance of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub versions: Versions,
    pub wall_time_secs: f64,
    pub files: Vec<String>,
    pub failed_cells: Vec<FailedCellRecord>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub ibnn: String,
    pub config_schema: u32,
    pub posterior_format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCellRecord {
    pub seed: u64,
    pub error: String,
}

impl From<&FailedCell> for FailedCellRecord {
    fn from(c: &FailedCell) -> Self {
        Self {
            seed: c.seed,
            error: c.error.clone(),
        }
    }
}

/// Writes the CSV files that apply to the task plus `manifest.json` into
/// `dir`, returning the manifest.
pub fn write_outcome(dir: &Path, cfg: &ExperimentConfig, outcome: &ExperimentOutcome, wall_time_secs: f64) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        write_csv(&dir.join(name), header, rows)?;
        files.push(name.to_string());
        Ok(())
    };

    if cfg.task != Task::GlucoseControl {
        emit(
            "results.csv",
            &RESULTS_HEADER,
            outcome
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.experiment_id.clone(),
                        opt(r.alpha),
                        r.model.to_string(),
                        opt(r.one_step),
                        opt(r.multi_step),
                        opt(r.mean_width),
                        opt(r.au),
                        opt(r.eu),
                        r.seed.to_string(),
                    ]
                })
                .collect(),
        )?;
    }
    if cfg.phi.is_some() && cfg.task != Task::GlucoseControl {
        emit(
            "abstentions.csv",
            &["experiment_id", "seed", "query", "lower_entropy", "threshold", "abstain"],
            outcome
                .abstentions
                .iter()
                .map(|a| {
                    vec![
                        a.experiment_id.clone(),
                        a.seed.to_string(),
                        a.query.to_string(),
                        num(a.lower_entropy),
                        num(a.threshold),
                        a.abstain.to_string(),
                    ]
                })
                .collect(),
        )?;
    }
    match cfg.task {
        Task::RegressionUq => emit(
            "member_coverage.csv",
            &["seed", "alpha", "member", "coverage"],
            outcome
                .member_coverage
                .iter()
                .map(|m| vec![m.seed.to_string(), num(m.alpha), m.member.to_string(), num(m.coverage)])
                .collect(),
        )?,
        Task::ClassificationUq => emit(
            "trends.csv",
            &["model", "quantity", "severities", "values", "is_nondecreasing", "spearman"],
            outcome
                .trends
                .iter()
                .map(|t| {
                    vec![
                        t.model.to_string(),
                        t.quantity.clone(),
                        joined(&t.severities),
                        joined(&t.values),
                        t.is_nondecreasing.to_string(),
                        num(t.spearman),
                    ]
                })
                .collect(),
        )?,
        Task::TrajectoryCoverage => {}
        Task::GlucoseControl => {
            let mut rows: Vec<Vec<String>> = outcome
                .control
                .iter()
                .map(|c| {
                    vec![
                        c.seed.to_string(),
                        num(c.alpha),
                        c.episodes.to_string(),
                        num(c.t_unsafe_ibnn),
                        num(c.t_unsafe_ebnn),
                        perf(&c.perf_diff),
                    ]
                })
                .collect();
            // Seed-averaged summary per alpha.
            for &alpha in &cfg.alphas {
                let at: Vec<_> = outcome.control.iter().filter(|c| c.alpha == alpha).collect();
                if at.is_empty() {
                    continue;
                }
                let n = at.len() as f64;
                rows.push(vec![
                    "mean".into(),
                    num(alpha),
                    at.iter().map(|c| c.episodes).sum::<usize>().to_string(),
                    num(at.iter().map(|c| c.t_unsafe_ibnn).sum::<f64>() / n),
                    num(at.iter().map(|c| c.t_unsafe_ebnn).sum::<f64>() / n),
                    mean_perf_diff(&outcome.control, alpha).map_or_else(|| "undefined".into(), num),
                ]);
            }
            emit("control_summary.csv", &CONTROL_HEADER, rows)?;
            emit(
                "traces.csv",
                &["seed", "alpha", "model", "episode", "t", "glucose"],
                outcome
                    .traces
                    .iter()
                    .map(|t| {
                        vec![
                            t.seed.to_string(),
                            num(t.alpha),
                            t.model.to_string(),
                            t.episode.to_string(),
                            t.t.to_string(),
                            num(t.glucose),
                        ]
                    })
                    .collect(),
            )?;
        }
    }

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        task: cfg.task,
        config_hash: cfg.hash()?,
        seeds: cfg.seeds.clone(),
        versions: Versions {
            ibnn: env!("CARGO_PKG_VERSION").into(),
            config_schema: SCHEMA_VERSION,
            posterior_format: crate::bnn::POSTERIOR_VERSION,
        },
        wall_time_secs,
        files,
        failed_cells: outcome.failed_cells.iter().map(FailedCellRecord::from).collect(),
        config: cfg.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads `manifest.json` from a run directory.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
}

/// Reads a CSV file as header plus string records.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ModelKind, ResultRow};
    use crate::harness::run::ControlRow;

    #[test]
    fn writes_task_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::preset(Task::GlucoseControl);
        let outcome = ExperimentOutcome {
            control: vec![
                ControlRow {
                    seed: 0,
                    alpha: 0.1,
                    episodes: 2,
                    t_unsafe_ibnn: 0.0,
                    t_unsafe_ebnn: 0.0,
                    perf_diff: PerfDiff::Undefined,
                },
                ControlRow {
                    seed: 1,
                    alpha: 0.1,
                    episodes: 2,
                    t_unsafe_ibnn: 0.05,
                    t_unsafe_ebnn: 0.1,
                    perf_diff: PerfDiff::Defined(0.5),
                },
            ],
            failed_cells: vec![FailedCell {
                seed: 2,
                error: "boom".into(),
            }],
            ..ExperimentOutcome::default()
        };
        let m = write_outcome(dir.path(), &cfg, &outcome, 1.5).unwrap();
        assert_eq!(m.files, vec!["control_summary.csv", "traces.csv"]);
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
        assert_eq!(m.failed_cells.len(), 1);
        let (header, rows) = read_csv(&dir.path().join("control_summary.csv")).unwrap();
        assert_eq!(header, CONTROL_HEADER);
        assert_eq!(rows[0][5], "undefined");
        assert_eq!(rows[1][5], "0.5");
        // The mean row averages only the defined value.
        assert_eq!(rows[2], vec!["mean", "0.1", "4", "0.025", "0.05", "0.5"]);
    }

    #[test]
    fn empty_optional_fields() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            phi: None,
            ..ExperimentConfig::preset(Task::TrajectoryCoverage)
        };
        let outcome = ExperimentOutcome {
            results: vec![ResultRow {
                experiment_id: "x".into(),
                alpha: None,
                model: ModelKind::Ebnn,
                one_step: None,
                multi_step: None,
                mean_width: None,
                au: Some(0.25),
                eu: Some(1e-17),
                seed: 3,
            }],
            ..ExperimentOutcome::default()
        };
        write_outcome(dir.path(), &cfg, &outcome, 0.0).unwrap();
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(text, format!("{}\nx,,ebnn,,,,0.25,0.00000000000000001,3\n", RESULTS_HEADER.join(",")));
    }
}
