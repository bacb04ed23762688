//! Experiment configuration: one JSON document per run, schema-versioned,
//! with unknown keys rejected and every field validated before training.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bnn::{Activation, GaussianPriorSpec, Head, MeanPattern, MlpArchitecture, TrainConfig};
use crate::error::{Error, Result};
use crate::harness::data::{TrajectorySpec, MAX_SEVERITY};
use crate::harness::glucose::{BehaviorSpec, EpisodeSpec, GlucoseFeatures, GlucoseParams, MpcConfig};
use crate::ibnn::{HdrMethod, LikelihoodSet, LikelihoodSpec, PriorSet, MIN_HDR_SAMPLES};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    RegressionUq,
    ClassificationUq,
    TrajectoryCoverage,
    GlucoseControl,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::RegressionUq,
        Task::ClassificationUq,
        Task::TrajectoryCoverage,
        Task::GlucoseControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::RegressionUq => "regression_uq",
            Task::ClassificationUq => "classification_uq",
            Task::TrajectoryCoverage => "trajectory_coverage",
            Task::GlucoseControl => "glucose_control",
        }
    }

    pub fn head(self) -> Head {
        match self {
            Task::ClassificationUq => Head::CategoricalSoftmax,
            _ => Head::GaussianRegression,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A likelihood without its input and output widths, which the task fixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodTemplate {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub noise_var: Option<f64>,
}

impl LikelihoodTemplate {
    fn regression(hidden: &[usize], activation: Activation, noise_var: f64) -> Self {
        Self {
            hidden: hidden.to_vec(),
            activation,
            noise_var: Some(noise_var),
        }
    }

    fn classification(hidden: &[usize], activation: Activation) -> Self {
        Self {
            hidden: hidden.to_vec(),
            activation,
            noise_var: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub train: usize,
    pub test: usize,
}

/// Simulator, predictor and controller settings of the control task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlucoseSection {
    pub params: GlucoseParams,
    pub features: GlucoseFeatures,
    pub behavior: BehaviorSpec,
    pub episodes: EpisodeSpec,
    pub mpc: MpcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: Task,
    pub priors: Vec<GaussianPriorSpec>,
    pub likelihoods: Vec<LikelihoodTemplate>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Corruption levels evaluated by the classification task.
    pub severities: Vec<u8>,
    /// Training and test set sizes; the control task sizes its data in
    /// `glucose` instead.
    pub sizes: Sizes,
    /// Shared training settings; each member's seed and noise variance are
    /// replaced per member.
    pub train: TrainConfig,
    /// Weight draws per member and query.
    pub n_mc: usize,
    pub hdr_method: HdrMethod,
    /// AU-check threshold (nats); `null` disables abstention.
    pub phi: Option<f64>,
    /// Raise the AU-check threshold by `log N` for N members.
    pub au_check_hull_bound: bool,
    /// Fresh draws per member and query when estimating member coverage of
    /// IBNN regions (regression task).
    pub coverage_draws: usize,
    pub trajectory: TrajectorySpec,
    pub glucose: GlucoseSection,
    pub output_dir: PathBuf,
}

fn prior(mean_pattern: MeanPattern, magnitude: f64, var: f64) -> GaussianPriorSpec {
    GaussianPriorSpec {
        mean_pattern,
        magnitude,
        var,
    }
}

impl ExperimentConfig {
    /// Built-in settings for `task`, sized for a single CPU core.
    pub fn preset(task: Task) -> Self {
        let train = TrainConfig {
            epochs: 300,
            learning_rate: 0.01,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let base = Self {
            schema_version: SCHEMA_VERSION,
            task,
            priors: vec![prior(MeanPattern::Zero, 0.0, 1.0), prior(MeanPattern::Zero, 0.0, 0.3)],
            likelihoods: Vec::new(),
            alphas: vec![0.1, 0.05, 0.01],
            seeds: vec![0, 1, 2],
            severities: Vec::new(),
            sizes: Sizes { train: 400, test: 100 },
            train,
            n_mc: 20,
            hdr_method: HdrMethod::Gaussian,
            phi: None,
            au_check_hull_bound: false,
            coverage_draws: 2000,
            trajectory: TrajectorySpec::default(),
            glucose: GlucoseSection::default(),
            output_dir: PathBuf::from("results").join(task.name()),
        };
        match task {
            Task::RegressionUq => Self {
                priors: vec![prior(MeanPattern::Zero, 0.0, 1.0), prior(MeanPattern::Positive, 0.1, 0.5)],
                likelihoods: vec![
                    LikelihoodTemplate::regression(&[32], Activation::Tanh, 0.04),
                    LikelihoodTemplate::regression(&[32], Activation::Relu, 0.09),
                ],
                n_mc: 50,
                phi: Some(1.5),
                ..base
            },
            Task::ClassificationUq => Self {
                priors: vec![prior(MeanPattern::Negative, 0.1, 1.0), prior(MeanPattern::Positive, 0.1, 1.0)],
                likelihoods: vec![
                    LikelihoodTemplate::classification(&[16], Activation::Tanh),
                    LikelihoodTemplate::classification(&[16], Activation::Relu),
                ],
                severities: (1..=MAX_SEVERITY).collect(),
                sizes: Sizes { train: 1000, test: 200 },
                train: TrainConfig { epochs: 1000, ..base.train },
                phi: Some(0.5),
                ..base
            },
            Task::TrajectoryCoverage => Self {
                likelihoods: vec![
                    LikelihoodTemplate::regression(&[32], Activation::Tanh, 0.0004),
                    LikelihoodTemplate::regression(&[32], Activation::Tanh, 0.002),
                ],
                sizes: Sizes { train: 2000, test: 500 },
                train: TrainConfig { epochs: 600, ..base.train },
                ..base
            },
            Task::GlucoseControl => Self {
                likelihoods: vec![
                    LikelihoodTemplate::regression(&[32], Activation::Tanh, 0.01),
                    LikelihoodTemplate::regression(&[32], Activation::Tanh, 0.03),
                ],
                n_mc: 10,
                glucose: GlucoseSection {
                    // Exploration with mild feedback covers 40-450 mg/dl
                    // without hitting the clamps; doses stay below ~4 units.
                    behavior: BehaviorSpec {
                        episodes: 60,
                        steps: 60,
                        g0_range: (40.0, 450.0),
                        dose_max: 1.0,
                        feedback_gain: 0.5,
                        feedback_target: 150.0,
                    },
                    episodes: EpisodeSpec {
                        g0_range: (280.0, 380.0),
                        ..EpisodeSpec::default()
                    },
                    // The controller may dose beyond anything seen in
                    // training, where the members disagree.
                    mpc: MpcConfig {
                        insulin_max: 6.0,
                        ..MpcConfig::default()
                    },
                    ..GlucoseSection::default()
                },
                ..base
            },
        }
    }

    /// Parses a config document. Keys that are absent take the preset value
    /// of the document's `task`, merged recursively through nested objects.
    pub fn from_json(s: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(s)?;
        let obj = user
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        match obj.get("schema_version") {
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
            Some(v) => return Err(Error::Config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
            None => return Err(Error::Config("missing schema_version".into())),
        }
        let task: Task = serde_json::from_value(
            obj.get("task")
                .cloned()
                .ok_or_else(|| Error::Config("missing task".into()))?,
        )
        .map_err(|e| Error::Config(format!("task: {e}")))?;
        let mut merged = serde_json::to_value(Self::preset(task))?;
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Input and output widths of the task's networks.
    pub fn io_dims(&self) -> (usize, usize) {
        match self.task {
            Task::RegressionUq => (1, 1),
            Task::ClassificationUq => (2, 2),
            Task::TrajectoryCoverage => (2 * self.trajectory.history, 2 * self.trajectory.horizon),
            Task::GlucoseControl => (self.glucose.features.input_dim(), self.glucose.features.output_dim()),
        }
    }

    pub fn prior_set(&self) -> Result<PriorSet> {
        PriorSet::new(self.priors.clone())
    }

    pub fn likelihood_set(&self) -> Result<LikelihoodSet> {
        let (d_in, d_out) = self.io_dims();
        let head = self.task.head();
        let members = self
            .likelihoods
            .iter()
            .map(|t| {
                let mut widths = vec![d_in];
                widths.extend_from_slice(&t.hidden);
                widths.push(d_out);
                let architecture = MlpArchitecture::new(widths, t.activation, head)?;
                Ok(LikelihoodSpec {
                    architecture,
                    noise_var: t.noise_var,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LikelihoodSet::new(members)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha must lie in (0, 1), got {a}"));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if let Some(s) = self.severities.iter().find(|s| **s > MAX_SEVERITY) {
            return bad(format!("severity must be at most {MAX_SEVERITY}, got {s}"));
        }
        if self.task == Task::ClassificationUq && self.severities.len() < 3 {
            return bad("classification_uq needs at least three severities to assess a trend".into());
        }
        if self.task != Task::GlucoseControl && (self.sizes.train < 10 || self.sizes.test < 1) {
            return bad("sizes.train must be >= 10 and sizes.test >= 1".into());
        }
        if self.coverage_draws == 0 {
            return bad("coverage_draws must be positive".into());
        }
        if self.n_mc == 0 {
            return bad("n_mc must be positive".into());
        }
        if self.hdr_method != HdrMethod::Gaussian && self.n_mc < MIN_HDR_SAMPLES {
            return bad(format!("sample-based HDRs need n_mc >= {MIN_HDR_SAMPLES}"));
        }
        if let Some(phi) = self.phi {
            if !(phi >= 0.0 && phi.is_finite()) {
                return bad(format!("phi must be a finite value >= 0, got {phi}"));
            }
        }
        self.train.validate().map_err(|e| Error::Config(format!("train: {e}")))?;
        self.prior_set().map_err(|e| Error::Config(format!("priors: {e}")))?;
        self.likelihood_set().map_err(|e| Error::Config(format!("likelihoods: {e}")))?;
        match self.task {
            Task::TrajectoryCoverage => self.trajectory.validate(),
            Task::GlucoseControl => self.validate_glucose(),
            _ => Ok(()),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    fn validate_glucose(&self) -> Result<()> {
        let g = &self.glucose;
        g.params.validate()?;
        if g.mpc.horizon != g.features.horizon {
            return Err(Error::InvalidArgument("mpc.horizon must equal features.horizon".into()));
        }
        if g.features.g_history == 0 || g.features.horizon == 0 {
            return Err(Error::InvalidArgument("features need a glucose history and a horizon".into()));
        }
        if g.behavior.episodes == 0 || g.behavior.steps == 0 || g.episodes.episodes == 0 || g.episodes.steps == 0 {
            return Err(Error::InvalidArgument("behavior and test episodes must be non-empty".into()));
        }
        for (lo, hi) in [g.behavior.g0_range, g.episodes.g0_range] {
            if !(lo <= hi && lo >= g.params.g_min && hi <= g.params.g_max) {
                return Err(Error::InvalidArgument(format!("initial glucose range ({lo}, {hi}) is invalid")));
            }
        }
        if !(g.behavior.dose_max > 0.0) || !(g.behavior.feedback_gain >= 0.0) || !g.behavior.feedback_target.is_finite() {
            return Err(Error::InvalidArgument("behavior needs dose_max > 0 and a finite, non-negative feedback".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
