//! Small stochastic MLPs trained by mean-field variational inference.

mod io;
mod mlp;
mod predict;
mod vi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::DiagonalGaussian;

pub use io::{PosteriorDocument, POSTERIOR_FORMAT, POSTERIOR_VERSION};
pub use mlp::{Activation, Head, MlpArchitecture, Workspace};
pub use predict::{predictive_classification, predictive_regression, RegressionPredictive, WeightDraws};
pub use vi::{elbo, elbo_with_gradient, train_vi, ElboEstimate, ReparamNoise};

/// Initial posterior log-variance for every weight.
pub const INIT_LOG_VAR: f64 = -4.605_170_185_988_091; // ln(1e-2)

/// Sign pattern of the prior mean vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanPattern {
    Negative,
    Zero,
    Positive,
}

/// Isotropic Gaussian prior over all weights and biases, `N(mu 1, var I)`
/// with `mu` in `{-c, 0, +c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPriorSpec {
    pub mean_pattern: MeanPattern,
    #[serde(default)]
    pub magnitude: f64,
    pub var: f64,
}

impl GaussianPriorSpec {
    pub fn new(mean_pattern: MeanPattern, magnitude: f64, var: f64) -> Result<Self> {
        let spec = Self {
            mean_pattern,
            magnitude,
            var,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero_mean(var: f64) -> Result<Self> {
        Self::new(MeanPattern::Zero, 0.0, var)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.var.is_finite() && self.var > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be positive, got {}",
                self.var
            )));
        }
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior mean magnitude must be >= 0, got {}",
                self.magnitude
            )));
        }
        Ok(())
    }

    /// Prior mean shared by every coordinate.
    pub fn mean_value(&self) -> f64 {
        match self.mean_pattern {
            MeanPattern::Negative => -self.magnitude,
            MeanPattern::Zero => 0.0,
            MeanPattern::Positive => self.magnitude,
        }
    }

    pub fn to_gaussian(&self, dim: usize) -> Result<DiagonalGaussian> {
        DiagonalGaussian::isotropic(vec![self.mean_value(); dim], self.var)
    }

    /// Whether two specs describe the same distribution.
    pub fn same_as(&self, other: &Self) -> bool {
        self.mean_value() == other.mean_value() && self.var == other.var
    }
}

/// Regression targets or class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Real(Vec<Vec<f64>>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(r) => r.len(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Paired inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Targets) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let d_in = inputs.first().map_or(0, Vec::len);
        if inputs.iter().any(|x| x.len() != d_in) {
            return Err(Error::InvalidArgument("ragged input rows".into()));
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite input".into()));
        }
        if let Targets::Real(rows) = &targets {
            let d_out = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != d_out) {
                return Err(Error::InvalidArgument("ragged target rows".into()));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite target".into()));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn regression(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(inputs, Targets::Real(targets))
    }

    pub fn classification(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        Self::new(inputs, Targets::Labels(labels))
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let inputs = indices.iter().map(|&i| self.inputs[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Real(r) => Targets::Real(indices.iter().map(|&i| r[i].clone()).collect()),
            Targets::Labels(l) => Targets::Labels(indices.iter().map(|&i| l[i]).collect()),
        };
        Self { inputs, targets }
    }

    /// Checks that the data fit `arch`'s input width and head.
    pub fn check_compatible(&self, arch: &MlpArchitecture) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if self.input_dim() != arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: arch.input_dim(),
                got: self.input_dim(),
            });
        }
        match (&self.targets, arch.head()) {
            (Targets::Real(rows), Head::GaussianRegression) => {
                let d = rows[0].len();
                if d != arch.output_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: arch.output_dim(),
                        got: d,
                    });
                }
            }
            (Targets::Labels(labels), Head::CategoricalSoftmax) => {
                if let Some(l) = labels.iter().find(|l| **l >= arch.output_dim()) {
                    return Err(Error::InvalidArgument(format!(
                        "label {l} outside {} classes",
                        arch.output_dim()
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "targets do not match the architecture head".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Stochastic-gradient VI settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mc_samples_per_step: usize,
    pub seed: u64,
    /// Observation noise variance of the Gaussian likelihood; ignored by
    /// categorical heads.
    pub likelihood_noise_var: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 128,
            mc_samples_per_step: 1,
            seed: 0,
            likelihood_noise_var: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.mc_samples_per_step == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and mc_samples_per_step must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.likelihood_noise_var.is_finite() && self.likelihood_noise_var > 0.0) {
            return Err(Error::InvalidArgument("likelihood_noise_var must be positive".into()));
        }
        Ok(())
    }
}

/// Provenance of a trained posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub final_elbo: f64,
    pub epochs: usize,
    /// Mean minibatch ELBO per epoch.
    #[serde(default)]
    pub elbo_history: Vec<f64>,
}

/// Factorized Gaussian approximation to a network's weight posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldPosterior {
    architecture: MlpArchitecture,
    mean: Vec<f64>,
    log_var: Vec<f64>,
    /// Gaussian likelihood noise variance (regression heads only).
    noise_var: Option<f64>,
    metadata: TrainingMetadata,
}

impl MeanFieldPosterior {
    pub fn new(
        architecture: MlpArchitecture,
        mean: Vec<f64>,
        log_var: Vec<f64>,
        noise_var: Option<f64>,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let p = architecture.param_count();
        for len in [mean.len(), log_var.len()] {
            if len != p {
                return Err(Error::DimensionMismatch { expected: p, got: len });
            }
        }
        if mean.iter().chain(&log_var).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite posterior parameter".into()));
        }
        match (architecture.head(), noise_var) {
            (Head::GaussianRegression, Some(v)) if v.is_finite() && v > 0.0 => {}
            (Head::GaussianRegression, _) => {
                return Err(Error::InvalidArgument(
                    "regression posteriors need a positive noise variance".into(),
                ))
            }
            (Head::CategoricalSoftmax, _) => {}
        }
        let noise_var = match architecture.head() {
            Head::GaussianRegression => noise_var,
            Head::CategoricalSoftmax => None,
        };
        Ok(Self {
            architecture,
            mean,
            log_var,
            noise_var,
            metadata,
        })
    }

    /// A posterior equal to `prior` (as a Gaussian over weights).
    pub fn from_prior(
        architecture: MlpArchitecture,
        prior: &GaussianPriorSpec,
        noise_var: Option<f64>,
    ) -> Result<Self> {
        let p = architecture.param_count();
        Self::new(
            architecture,
            vec![prior.mean_value(); p],
            vec![prior.var.ln(); p],
            noise_var,
            TrainingMetadata {
                seed: 0,
                final_elbo: 0.0,
                epochs: 0,
                elbo_history: Vec::new(),
            },
        )
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.architecture
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_var(&self) -> &[f64] {
        &self.log_var
    }

    pub fn var(&self) -> Vec<f64> {
        self.log_var.iter().map(|l| l.exp()).collect()
    }

    pub fn noise_var(&self) -> Option<f64> {
        self.noise_var
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    pub fn param_count(&self) -> usize {
        self.mean.len()
    }

    pub fn as_gaussian(&self) -> Result<DiagonalGaussian> {
        DiagonalGaussian::new(self.mean.clone(), self.var())
    }
}
