use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use ibnn::baselines::{ebnn_classify, ebnn_hdr, EnsembleSummary};
use ibnn::bnn::Head;
use ibnn::harness::config::{ExperimentConfig, Task};
use ibnn::harness::output::{read_csv, read_manifest, write_csv, write_outcome, RESULTS_HEADER};
use ibnn::harness::run::{run_experiment, train_cell, training_data};
use ibnn::ibnn::{credible_set, ihdr, imprecise_credible_set, mass_of, predictive_credal_set, PosteriorCredalSet};
use ibnn::prob::{derive_seed, RngStream};
use ibnn::{Error, Result};

#[derive(Parser)]
#[command(name = "ibnn", version, about = "Imprecise Bayesian neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Credible level(s) to evaluate; repeat for several.
    #[arg(long)]
    alpha: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the posterior set for one seed and save it as JSON.
    Train(Common),
    /// IHDRs / credible sets for the inputs of a CSV file.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Saved posterior set (defaults to <out>/posteriors.json).
        #[arg(long)]
        posteriors: Option<PathBuf>,
        /// CSV with a header row and one input vector per line.
        #[arg(long)]
        inputs: PathBuf,
    },
    /// Run an uncertainty-quantification experiment (regression,
    /// classification or trajectory task).
    Uq(Common),
    /// Run the glucose control experiment.
    Control(Common),
    /// Summarize the CSV outputs of a finished run.
    Report {
        /// Run directory holding manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in config of a task.
    Preset {
        #[arg(value_parser = parse_task)]
        task: Task,
    },
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    Task::ALL
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| format!("unknown task {s}"))
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(&common.config)?)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if !common.alpha.is_empty() {
        cfg.alphas = common.alpha.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(common: &Common, allowed: &[Task]) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    if !allowed.contains(&cfg.task) {
        return Err(Error::Config(format!("task {} is not handled by this subcommand", cfg.task)));
    }
    let start = Instant::now();
    let outcome = run_experiment(&cfg)?;
    let manifest = write_outcome(&cfg.output_dir, &cfg, &outcome, start.elapsed().as_secs_f64())?;
    println!("wrote {} to {}", manifest.files.join(", "), cfg.output_dir.display());
    if manifest.failed_cells.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in &manifest.failed_cells {
            eprintln!("seed {} failed: {}", c.seed, c.error);
        }
        Ok(ExitCode::FAILURE)
    }
}

fn train(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let seed = cfg.seeds[0];
    let pcs = train_cell(&cfg, &training_data(&cfg, seed)?, seed)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("posteriors.json");
    fs::write(&path, pcs.to_json()?)?;
    if let Some(w) = pcs.degeneracy() {
        eprintln!("warning: members nearly identical (max pairwise KL {:.3e})", w.max_pairwise_kl);
    }
    println!("wrote {} members to {}", pcs.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn read_inputs(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let (_, rows) = read_csv(path)?;
    rows.iter()
        .map(|r| {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            r.iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("input {v:?}: {e}"))))
                .collect()
        })
        .collect()
}

fn intervals(r: &ibnn::ibnn::Region1D) -> String {
    r.intervals().iter().map(|i| format!("[{},{}]", i.lo, i.hi)).collect::<Vec<_>>().join(";")
}

fn predict(common: &Common, posteriors: Option<&Path>, inputs: &Path) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let path = posteriors.map_or_else(|| cfg.output_dir.join("posteriors.json"), Path::to_path_buf);
    let pcs = PosteriorCredalSet::from_json(&fs::read_to_string(&path)?)?;
    let xs = read_inputs(inputs, pcs.input_dim())?;
    let mut rng = RngStream::new(derive_seed(cfg.seeds[0], &[u64::from_le_bytes(*b"predict\0")]), 0);
    let mut rows = Vec::new();
    for (q, x) in xs.iter().enumerate() {
        let pred = predictive_credal_set(&pcs, x, cfg.n_mc, &mut rng)?;
        for &alpha in &cfg.alphas {
            match pcs.head() {
                Head::GaussianRegression => {
                    // Per-dimension regions, no Bonferroni adjustment.
                    let ibnn = ihdr(&pred, alpha, cfg.hdr_method)?;
                    for (k, r) in ibnn.iter().enumerate() {
                        rows.push(vec![q.to_string(), alpha.to_string(), "ibnn".into(), k.to_string(), intervals(r), r.total_length().to_string()]);
                    }
                    let ens = ebnn_hdr(&EnsembleSummary::from_predictive(&pred)?, alpha)?;
                    for (k, r) in ens.iter().enumerate() {
                        rows.push(vec![q.to_string(), alpha.to_string(), "ebnn".into(), k.to_string(), intervals(r), r.total_length().to_string()]);
                    }
                }
                Head::CategoricalSoftmax => {
                    let members = pred.as_classification()?;
                    let ics = imprecise_credible_set(&pred, alpha)?;
                    let min_mass = members.iter().map(|m| mass_of(m, &ics.labels)).fold(f64::INFINITY, f64::min);
                    let labels = |l: &[usize]| l.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
                    rows.push(vec![q.to_string(), alpha.to_string(), "ibnn".into(), labels(&ics.labels), min_mass.to_string()]);
                    let cs = credible_set(&ebnn_classify(members)?.probs, alpha)?;
                    rows.push(vec![q.to_string(), alpha.to_string(), "ebnn".into(), labels(&cs.labels), cs.achieved_mass.to_string()]);
                }
            }
        }
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg.output_dir.join("predictions.csv");
    match pcs.head() {
        Head::GaussianRegression => write_csv(&out, &["query", "alpha", "model", "dim", "intervals", "total_length"], rows)?,
        Head::CategoricalSoftmax => write_csv(&out, &["query", "alpha", "model", "labels", "min_mass"], rows)?,
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

/// Seed-averaged results per (experiment, alpha, model), as printed and
/// written to `summary.csv`.
fn summarize_results(dir: &Path) -> Result<()> {
    let (header, rows) = read_csv(&dir.join("results.csv"))?;
    if header != RESULTS_HEADER {
        return Err(Error::Format("results.csv has an unexpected header".into()));
    }
    let metrics = 3..8;
    let mut groups: BTreeMap<(String, String, String), Vec<(f64, usize)>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &rows {
        let key = (r[0].clone(), r[1].clone(), r[2].clone());
        let acc = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            vec![(0.0, 0); metrics.len()]
        });
        for (slot, v) in acc.iter_mut().zip(&r[metrics.clone()]) {
            if let Ok(v) = v.parse::<f64>() {
                slot.0 += v;
                slot.1 += 1;
            }
        }
    }
    let mut out_rows = Vec::new();
    println!("{:<40} {:>6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "experiment", "alpha", "model", "one_step", "multi", "width", "au", "eu");
    for key in order {
        let cells: Vec<String> = groups[&key]
            .iter()
            .map(|(s, n)| if *n == 0 { String::new() } else { format!("{}", s / *n as f64) })
            .collect();
        let short: Vec<String> = cells
            .iter()
            .map(|c| c.parse::<f64>().map_or("-".into(), |v| format!("{v:.4}")))
            .collect();
        println!("{:<40} {:>6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", key.0, key.1, key.2, short[0], short[1], short[2], short[3], short[4]);
        let mut row = vec![key.0, key.1, key.2];
        row.extend(cells);
        out_rows.push(row);
    }
    write_csv(&dir.join("summary.csv"), &RESULTS_HEADER[..8], out_rows)
}

fn report(dir: &Path) -> Result<ExitCode> {
    let manifest = read_manifest(dir)?;
    println!("task {}  config {}  seeds {:?}", manifest.task, &manifest.config_hash[..12], manifest.seeds);
    if manifest.files.iter().any(|f| f == "results.csv") {
        summarize_results(dir)?;
    }
    for name in ["trends.csv", "control_summary.csv"] {
        if manifest.files.iter().any(|f| f == name) {
            let (header, rows) = read_csv(&dir.join(name))?;
            println!("\n{name}\n{}", header.join("  "));
            for r in rows {
                println!("{}", r.join("  "));
            }
        }
    }
    if !manifest.failed_cells.is_empty() {
        println!("\n{} failed cell(s)", manifest.failed_cells.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(c) => train(&c),
        Command::Predict { common, posteriors, inputs } => predict(&common, posteriors.as_deref(), &inputs),
        Command::Uq(c) => experiment(&c, &[Task::RegressionUq, Task::ClassificationUq, Task::TrajectoryCoverage]),
        Command::Control(c) => experiment(&c, &[Task::GlucoseControl]),
        Command::Report { out } => report(&out),
        Command::Preset { task } => {
            // Written without println! so a closed pipe is an error, not a panic.
            writeln!(std::io::stdout(), "{}", ExperimentConfig::preset(task).to_json()?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
