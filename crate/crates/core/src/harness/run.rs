//! Experiment orchestration. Every seed is an independent cell; a failing
//! cell is recorded and the rest still run.

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{ebnn_classify, ebnn_hdr, EnsembleSummary};
use crate::bnn::{Dataset, Head, Targets, WeightDraws};
use crate::credal::au_check;
use crate::error::{Error, Result};
use crate::eval::{coverage_report, monotone_trend, perf_diff, t_unsafe, ModelKind, PerfDiff, ResultRow, SAFE_HI, SAFE_LO};
use crate::harness::config::{ExperimentConfig, Task};
use crate::harness::data::{
    gen_classification, gen_regression, gen_trajectories, to_local_frame, trajectory_dataset, trajectory_features,
    TrajectorySplit,
};
use crate::harness::glucose::{glucose_training_data, run_episode, EpisodeNoise, LearnedPredictor};
use crate::ibnn::{
    bonferroni_alpha, credible_set, ihdr, ihdr_box, imprecise_credible_set, mass_of, predictive_au_eu,
    predictive_credal_set, train_ibnn, HdrMethod, PosteriorCredalSet, PredictiveCredalSet, Region1D, RegionBox,
};
use crate::prob::{derive_seed, RngStream};

// Sub-seed tags, so that data, training and evaluation never share a stream.
const TAG_TRAIN_DATA: u64 = 1;
const TAG_TEST_DATA: u64 = 2;
const TAG_EVAL: u64 = 3;
const TAG_EPISODES: u64 = 4;

/// One AU-check decision; every evaluated query gets one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstentionRow {
    pub experiment_id: String,
    pub seed: u64,
    pub query: usize,
    pub lower_entropy: f64,
    pub threshold: f64,
    pub abstain: bool,
}

/// Mean time-unsafe of both controllers over one seed's paired episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlRow {
    pub seed: u64,
    pub alpha: f64,
    pub episodes: usize,
    pub t_unsafe_ibnn: f64,
    pub t_unsafe_ebnn: f64,
    pub perf_diff: PerfDiff,
}

/// Glucose at one step of one closed-loop episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub seed: u64,
    pub alpha: f64,
    pub model: ModelKind,
    pub episode: usize,
    pub t: usize,
    pub glucose: f64,
}

/// Coverage of an IBNN region under one member's own predictive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberCoverageRow {
    pub seed: u64,
    pub alpha: f64,
    pub member: usize,
    pub coverage: f64,
}

/// Seed-averaged uncertainty across severities, with its rank trend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub model: ModelKind,
    pub quantity: String,
    pub severities: Vec<u8>,
    pub values: Vec<f64>,
    pub is_nondecreasing: bool,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedCell {
    pub seed: u64,
    pub error: String,
}

/// Everything a run produces, in deterministic order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub results: Vec<ResultRow>,
    pub abstentions: Vec<AbstentionRow>,
    pub member_coverage: Vec<MemberCoverageRow>,
    pub control: Vec<ControlRow>,
    pub traces: Vec<TraceRow>,
    pub trends: Vec<TrendRow>,
    pub failed_cells: Vec<FailedCell>,
}

impl ExperimentOutcome {
    fn absorb(&mut self, other: ExperimentOutcome) {
        self.results.extend(other.results);
        self.abstentions.extend(other.abstentions);
        self.member_coverage.extend(other.member_coverage);
        self.control.extend(other.control);
        self.traces.extend(other.traces);
        self.trends.extend(other.trends);
        self.failed_cells.extend(other.failed_cells);
    }
}

/// Runs every seed of `cfg` and collects the outcome. Only configuration
/// errors are returned as `Err`; cell failures land in `failed_cells`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let cells: Vec<(u64, Result<ExperimentOutcome>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            log::info!("{}: seed {seed}", cfg.task);
            let out = match cfg.task {
                Task::RegressionUq => regression_cell(cfg, seed),
                Task::ClassificationUq => classification_cell(cfg, seed),
                Task::TrajectoryCoverage => trajectory_cell(cfg, seed),
                Task::GlucoseControl => glucose_cell(cfg, seed),
            };
            (seed, out)
        })
        .collect();
    let mut outcome = ExperimentOutcome::default();
    for (seed, cell) in cells {
        match cell {
            Ok(out) => outcome.absorb(out),
            Err(e) => {
                log::error!("{}: seed {seed} failed: {e}", cfg.task);
                outcome.failed_cells.push(FailedCell {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    if cfg.task == Task::ClassificationUq && outcome.failed_cells.is_empty() {
        outcome.trends = severity_trends(cfg, &outcome.results)?;
    }
    Ok(outcome)
}

/// Trains the posterior set of one seed on `data`.
pub fn train_cell(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<PosteriorCredalSet> {
    let mut train = cfg.train.clone();
    train.seed = seed;
    train_ibnn(&cfg.prior_set()?, &cfg.likelihood_set()?, data, &train)
}

/// Training set of the task for one seed.
pub fn training_data(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let s = derive_seed(seed, &[TAG_TRAIN_DATA]);
    match cfg.task {
        Task::RegressionUq => gen_regression(cfg.sizes.train, s),
        Task::ClassificationUq => gen_classification(cfg.sizes.train, s, 0),
        Task::TrajectoryCoverage => {
            trajectory_dataset(&gen_trajectories(cfg.sizes.train, s, TrajectorySplit::InDist, &cfg.trajectory)?)
        }
        Task::GlucoseControl => {
            let g = &cfg.glucose;
            glucose_training_data(&g.behavior, &g.features, &g.params, s)
        }
    }
}

fn eval_rng(seed: u64, path: u64) -> RngStream {
    RngStream::new(derive_seed(seed, &[TAG_EVAL, path]), 0)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn row(experiment_id: &str, alpha: Option<f64>, model: ModelKind, seed: u64) -> ResultRow {
    ResultRow {
        experiment_id: experiment_id.to_string(),
        alpha,
        model,
        one_step: None,
        multi_step: None,
        mean_width: None,
        au: None,
        eu: None,
        seed,
    }
}

/// Predictive sets at `inputs`, plus their AU/EU rows and AU-check log.
struct Evaluated {
    preds: Vec<PredictiveCredalSet>,
    rows: Vec<ResultRow>,
    abstentions: Vec<AbstentionRow>,
}

fn evaluate_queries(
    cfg: &ExperimentConfig,
    pcs: &PosteriorCredalSet,
    inputs: &[Vec<f64>],
    experiment_id: &str,
    seed: u64,
    rng: &mut RngStream,
) -> Result<Evaluated> {
    let preds = inputs
        .iter()
        .map(|x| predictive_credal_set(pcs, x, cfg.n_mc, rng))
        .collect::<Result<Vec<_>>>()?;
    let splits = preds.iter().map(predictive_au_eu).collect::<Result<Vec<_>>>()?;
    let mut abstentions = Vec::new();
    if let Some(phi) = cfg.phi {
        let threshold = if cfg.au_check_hull_bound {
            phi + (pcs.len() as f64).ln()
        } else {
            phi
        };
        for (query, s) in splits.iter().enumerate() {
            abstentions.push(AbstentionRow {
                experiment_id: experiment_id.to_string(),
                seed,
                query,
                lower_entropy: s.aleatoric,
                threshold,
                abstain: au_check(s.aleatoric, phi, pcs.len(), cfg.au_check_hull_bound)?,
            });
        }
    }
    let mut ibnn = row(experiment_id, None, ModelKind::Ibnn, seed);
    ibnn.au = Some(mean(splits.iter().map(|s| s.aleatoric)));
    ibnn.eu = Some(mean(splits.iter().map(|s| s.epistemic)));
    let mut ebnn = row(experiment_id, None, ModelKind::Ebnn, seed);
    match pcs.head() {
        Head::GaussianRegression => {
            let sums = preds.iter().map(EnsembleSummary::from_predictive).collect::<Result<Vec<_>>>()?;
            ebnn.au = Some(mean(sums.iter().map(|s| s.aleatoric_part.iter().sum::<f64>())));
            ebnn.eu = Some(mean(sums.iter().map(|s| s.epistemic_part.iter().sum::<f64>())));
        }
        Head::CategoricalSoftmax => {
            let sums = preds
                .iter()
                .map(|p| ebnn_classify(p.as_classification()?))
                .collect::<Result<Vec<_>>>()?;
            ebnn.au = Some(mean(sums.iter().map(|s| s.aleatoric)));
            ebnn.eu = Some(mean(sums.iter().map(|s| s.epistemic)));
        }
    }
    Ok(Evaluated {
        preds,
        rows: vec![ibnn, ebnn],
        abstentions,
    })
}

fn regression_targets(data: &Dataset) -> Result<&[Vec<f64>]> {
    match data.targets() {
        Targets::Real(y) => Ok(y),
        Targets::Labels(_) => Err(Error::InvalidArgument("expected regression targets".into())),
    }
}

fn regression_cell(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let id = Task::RegressionUq.name();
    let pcs = train_cell(cfg, &training_data(cfg, seed)?, seed)?;
    let test = gen_regression(cfg.sizes.test, derive_seed(seed, &[TAG_TEST_DATA]))?;
    let ys = regression_targets(&test)?;
    let ev = evaluate_queries(cfg, &pcs, test.inputs(), id, seed, &mut eval_rng(seed, 0))?;
    let mut out = ExperimentOutcome {
        results: ev.rows,
        abstentions: ev.abstentions,
        ..ExperimentOutcome::default()
    };
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        let ibnn = ev
            .preds
            .iter()
            .map(|p| ihdr_box(p, alpha, cfg.hdr_method))
            .collect::<Result<Vec<_>>>()?;
        let ebnn = ev
            .preds
            .iter()
            .map(|p| crate::baselines::ebnn_box(&EnsembleSummary::from_predictive(p)?, alpha))
            .collect::<Result<Vec<_>>>()?;
        for (model, boxes) in [(ModelKind::Ibnn, ibnn), (ModelKind::Ebnn, ebnn)] {
            let mut r = row(id, Some(alpha), model, seed);
            r.one_step = Some(mean(boxes.iter().zip(ys).map(|(b, y)| b.contains(y) as u8 as f64)));
            r.mean_width = Some(mean(boxes.iter().map(RegionBox::mean_width)));
            out.results.push(r);
        }
        let cov = member_coverage(
            &pcs,
            test.inputs(),
            alpha,
            cfg.n_mc,
            cfg.coverage_draws,
            cfg.hdr_method,
            &mut eval_rng(seed, 1 + ai as u64),
        )?;
        out.member_coverage.extend(cov.into_iter().enumerate().map(|(member, coverage)| MemberCoverageRow {
            seed,
            alpha,
            member,
            coverage,
        }));
    }
    Ok(out)
}

/// Probability each member assigns to the IBNN region, estimated with
/// `draws` fresh joint samples from that member's predictive at every input
/// and averaged over inputs. The regions themselves come from `n_mc` draws
/// taken before, so the estimate is out of sample.
pub fn member_coverage(
    pcs: &PosteriorCredalSet,
    inputs: &[Vec<f64>],
    alpha: f64,
    n_mc: usize,
    draws: usize,
    method: HdrMethod,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let mut hits = vec![0.0; pcs.len()];
    for x in inputs {
        let pred = predictive_credal_set(pcs, x, n_mc, rng)?;
        let region = ihdr_box(&pred, alpha, method)?;
        for (j, post) in pcs.posteriors().enumerate() {
            let weights = WeightDraws::sample(post, draws, rng);
            let noise_sd = weights.noise_var().sqrt();
            let mut ws = weights.workspace();
            let mut inside = 0usize;
            for out in weights.outputs(x, &mut ws) {
                let y: Vec<f64> = out.iter().map(|m| m + noise_sd * rng.standard_normal()).collect();
                inside += region.contains(&y) as usize;
            }
            hits[j] += inside as f64 / draws as f64;
        }
    }
    Ok(hits.into_iter().map(|h| h / inputs.len() as f64).collect())
}

pub(crate) fn severity_id(severity: u8) -> String {
    format!("{}.severity_{severity}", Task::ClassificationUq.name())
}

fn classification_cell(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let pcs = train_cell(cfg, &training_data(cfg, seed)?, seed)?;
    let mut out = ExperimentOutcome::default();
    for (si, &severity) in cfg.severities.iter().enumerate() {
        let id = severity_id(severity);
        // The same test seed at every severity: identical clean points and
        // noise directions, only the noise scale changes.
        let test = gen_classification(cfg.sizes.test, derive_seed(seed, &[TAG_TEST_DATA]), severity)?;
        let Targets::Labels(labels) = test.targets() else {
            return Err(Error::InvalidArgument("expected labels".into()));
        };
        let ev = evaluate_queries(cfg, &pcs, test.inputs(), &id, seed, &mut eval_rng(seed, si as u64))?;
        out.results.extend(ev.rows);
        out.abstentions.extend(ev.abstentions);
        for &alpha in &cfg.alphas {
            let mut ibnn = row(&id, Some(alpha), ModelKind::Ibnn, seed);
            let mut ebnn = row(&id, Some(alpha), ModelKind::Ebnn, seed);
            let (mut ic, mut iw, mut ec, mut ew) = (0.0, 0.0, 0.0, 0.0);
            for (pred, &label) in ev.preds.iter().zip(labels) {
                let ics = imprecise_credible_set(pred, alpha)?;
                // Every member must give the set at least 1 - alpha.
                for m in pred.as_classification()? {
                    let mass = mass_of(m, &ics.labels);
                    if mass < 1.0 - alpha {
                        return Err(Error::InvalidArgument(format!(
                            "credible set mass {mass} below {} at severity {severity}",
                            1.0 - alpha
                        )));
                    }
                }
                ic += ics.contains(label) as u8 as f64;
                iw += ics.len() as f64;
                let avg = ebnn_classify(pred.as_classification()?)?.probs;
                let cs = credible_set(&avg, alpha)?;
                ec += cs.contains(label) as u8 as f64;
                ew += cs.len() as f64;
            }
            let n = labels.len() as f64;
            (ibnn.one_step, ibnn.mean_width) = (Some(ic / n), Some(iw / n));
            (ebnn.one_step, ebnn.mean_width) = (Some(ec / n), Some(ew / n));
            out.results.push(ibnn);
            out.results.push(ebnn);
        }
    }
    Ok(out)
}

/// Seed-averaged AU and EU per severity for both models, with their trends.
fn severity_trends(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<Vec<TrendRow>> {
    let mut severities = cfg.severities.clone();
    severities.sort_unstable();
    severities.dedup();
    let mut trends = Vec::new();
    for model in [ModelKind::Ibnn, ModelKind::Ebnn] {
        for quantity in ["au", "eu"] {
            let values: Vec<f64> = severities
                .iter()
                .map(|&s| {
                    let id = severity_id(s);
                    mean(
                        rows.iter()
                            .filter(|r| r.experiment_id == id && r.model == model && r.alpha.is_none())
                            .filter_map(|r| if quantity == "au" { r.au } else { r.eu }),
                    )
                })
                .collect();
            let trend = monotone_trend(&values)?;
            trends.push(TrendRow {
                model,
                quantity: quantity.to_string(),
                severities: severities.clone(),
                values,
                is_nondecreasing: trend.is_nondecreasing,
                spearman: trend.spearman,
            });
        }
    }
    Ok(trends)
}

fn trajectory_cell(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let pcs = train_cell(cfg, &training_data(cfg, seed)?, seed)?;
    let horizon = cfg.trajectory.horizon;
    let mut out = ExperimentOutcome::default();
    for (si, split) in [TrajectorySplit::InDist, TrajectorySplit::Ood].into_iter().enumerate() {
        let id = format!("{}.{split}", Task::TrajectoryCoverage.name());
        let test = gen_trajectories(cfg.sizes.test, derive_seed(seed, &[TAG_TEST_DATA, si as u64]), split, &cfg.trajectory)?;
        let local: Vec<_> = test.iter().map(to_local_frame).collect();
        let inputs: Vec<Vec<f64>> = local.iter().map(trajectory_features).collect();
        let ev = evaluate_queries(cfg, &pcs, &inputs, &id, seed, &mut eval_rng(seed, si as u64))?;
        out.results.extend(ev.rows);
        out.abstentions.extend(ev.abstentions);
        for &alpha in &cfg.alphas {
            // Every coordinate of the whole horizon at alpha / (2 h), so the
            // full tube reaches 1 - alpha jointly.
            let per_dim = bonferroni_alpha(alpha, 2 * horizon);
            let mut ibnn_boxes = Vec::with_capacity(ev.preds.len());
            let mut ebnn_boxes = Vec::with_capacity(ev.preds.len());
            for pred in &ev.preds {
                ibnn_boxes.push(step_boxes(ihdr(pred, per_dim, cfg.hdr_method)?, alpha)?);
                let summary = EnsembleSummary::from_predictive(pred)?;
                ebnn_boxes.push(step_boxes(ebnn_hdr(&summary, per_dim)?, alpha)?);
            }
            for (model, boxes) in [(ModelKind::Ibnn, ibnn_boxes), (ModelKind::Ebnn, ebnn_boxes)] {
                let rep = coverage_report(&boxes, &local, alpha)?;
                let mut r = row(&id, Some(alpha), model, seed);
                r.one_step = Some(rep.one_step);
                r.multi_step = Some(rep.multi_step);
                r.mean_width = Some(rep.mean_region_width);
                out.results.push(r);
            }
        }
    }
    Ok(out)
}

/// Groups per-coordinate regions `[a_1, b_1, a_2, b_2, ..]` into one 2-D
/// box per step.
fn step_boxes(dims: Vec<Region1D>, alpha: f64) -> Result<Vec<RegionBox>> {
    dims.chunks(2).map(|c| RegionBox::new(alpha, c.to_vec())).collect()
}

fn glucose_cell(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let g = &cfg.glucose;
    let pcs = train_cell(cfg, &training_data(cfg, seed)?, seed)?;
    let mut rng = RngStream::new(derive_seed(seed, &[TAG_EPISODES]), 0);
    let noises: Vec<EpisodeNoise> = (0..g.episodes.episodes)
        .map(|_| EpisodeNoise::draw(&g.episodes, &mut rng))
        .collect();
    let mut out = ExperimentOutcome::default();
    for &alpha in &cfg.alphas {
        let mut t = [0.0; 2];
        for (mi, model) in [ModelKind::Ibnn, ModelKind::Ebnn].into_iter().enumerate() {
            let predictor = LearnedPredictor {
                set: &pcs,
                kind: model,
                alpha,
                n_mc: cfg.n_mc,
                features: g.features,
            };
            let traces = noises
                .par_iter()
                .map(|n| run_episode(&predictor, &g.episodes, n, &g.params, &g.mpc))
                .collect::<Result<Vec<_>>>()?;
            for (episode, trace) in traces.iter().enumerate() {
                // The initial reading precedes any control decision.
                t[mi] += t_unsafe(&trace[1..], SAFE_LO, SAFE_HI)? / traces.len() as f64;
                out.traces.extend(trace.iter().enumerate().map(|(step, &glucose)| TraceRow {
                    seed,
                    alpha,
                    model,
                    episode,
                    t: step,
                    glucose,
                }));
            }
        }
        out.control.push(ControlRow {
            seed,
            alpha,
            episodes: noises.len(),
            t_unsafe_ibnn: t[0],
            t_unsafe_ebnn: t[1],
            perf_diff: perf_diff(t[1], t[0]),
        });
    }
    Ok(out)
}

/// Mean of the defined per-seed `Perf_diff` values at `alpha`, or `None`
/// when no seed had any unsafe time under the ensemble controller.
pub fn mean_perf_diff(rows: &[ControlRow], alpha: f64) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.alpha == alpha)
        .filter_map(|r| r.perf_diff.value())
        .collect();
    (!vals.is_empty()).then(|| mean(vals))
}
