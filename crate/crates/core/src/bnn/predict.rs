//! Monte-Carlo predictive distributions: draw weights from the posterior,
//! push the input through the network, then sample the likelihood.

use serde::{Deserialize, Serialize};

use super::mlp::Workspace;
use super::{Head, MeanFieldPosterior, MlpArchitecture};
use crate::error::{Error, Result};
use crate::prob::{CategoricalDist, EmpiricalSample1D, RngStream};

/// Predictive summary of a regression network at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPredictive {
    /// Mean network output per output dimension.
    pub mean: Vec<f64>,
    /// Variance of the network output plus the likelihood noise variance.
    pub var: Vec<f64>,
    /// Draws `f(x; theta_s) + noise` per output dimension.
    pub samples: Vec<EmpiricalSample1D>,
}

impl RegressionPredictive {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A fixed set of weight vectors drawn from a posterior. Reusing one set
/// across many inputs gives common random numbers when comparing inputs.
#[derive(Debug, Clone)]
pub struct WeightDraws {
    architecture: MlpArchitecture,
    draws: Vec<Vec<f64>>,
    noise_var: f64,
}

impl WeightDraws {
    pub fn sample(posterior: &MeanFieldPosterior, n: usize, rng: &mut RngStream) -> Self {
        let sd: Vec<f64> = posterior.log_var().iter().map(|l| (0.5 * l).exp()).collect();
        let draws = (0..n)
            .map(|_| {
                posterior
                    .mean()
                    .iter()
                    .zip(&sd)
                    .map(|(m, s)| m + s * rng.standard_normal())
                    .collect()
            })
            .collect();
        Self {
            architecture: posterior.architecture().clone(),
            draws,
            noise_var: posterior.noise_var().unwrap_or(0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.architecture
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn workspace(&self) -> Workspace {
        self.architecture.workspace()
    }

    /// Network outputs for every draw, `[draw][output]`.
    pub fn outputs(&self, x: &[f64], ws: &mut Workspace) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|theta| self.architecture.forward_ws(theta, x, ws).to_vec())
            .collect()
    }

    /// Per-output mean of the network output and its variance plus the
    /// noise variance.
    pub fn moments(&self, x: &[f64], ws: &mut Workspace) -> (Vec<f64>, Vec<f64>) {
        let d = self.architecture.output_dim();
        let n = self.draws.len() as f64;
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        for theta in &self.draws {
            let out = self.architecture.forward_ws(theta, x, ws);
            for k in 0..d {
                sum[k] += out[k];
                sum_sq[k] += out[k] * out[k];
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let var = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / n - m * m).max(0.0) + self.noise_var)
            .collect();
        (mean, var)
    }
}

fn check_input(posterior: &MeanFieldPosterior, x: &[f64], head: Head) -> Result<()> {
    let arch = posterior.architecture();
    if arch.head() != head {
        return Err(Error::InvalidArgument(format!(
            "posterior head is {:?}, expected {:?}",
            arch.head(),
            head
        )));
    }
    if x.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Regression predictive at `x` from `n_mc` posterior draws.
pub fn predictive_regression(
    posterior: &MeanFieldPosterior,
    x: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<RegressionPredictive> {
    check_input(posterior, x, Head::GaussianRegression)?;
    if n_mc < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_mc });
    }
    let draws = WeightDraws::sample(posterior, n_mc, rng);
    let mut ws = draws.workspace();
    let outs = draws.outputs(x, &mut ws);
    let d = draws.architecture().output_dim();
    let noise_sd = draws.noise_var().sqrt();
    let n = n_mc as f64;

    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    let mut samples = vec![Vec::with_capacity(n_mc); d];
    for out in &outs {
        for k in 0..d {
            mean[k] += out[k] / n;
        }
    }
    for out in &outs {
        for k in 0..d {
            let r = out[k] - mean[k];
            var[k] += r * r / n;
            samples[k].push(out[k] + noise_sd * rng.standard_normal());
        }
    }
    var.iter_mut().for_each(|v| *v += draws.noise_var());
    Ok(RegressionPredictive {
        mean,
        var,
        samples: samples
            .into_iter()
            .map(EmpiricalSample1D::new)
            .collect::<Result<_>>()?,
    })
}

/// Average of `n_mc` softmax outputs at `x`.
pub fn predictive_classification(
    posterior: &MeanFieldPosterior,
    x: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<CategoricalDist> {
    check_input(posterior, x, Head::CategoricalSoftmax)?;
    if n_mc == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let draws = WeightDraws::sample(posterior, n_mc, rng);
    let mut ws = draws.workspace();
    let mut avg = vec![0.0; posterior.architecture().output_dim()];
    for logits in draws.outputs(x, &mut ws) {
        let p = CategoricalDist::from_logits(&logits)?;
        for (a, q) in avg.iter_mut().zip(p.probs()) {
            *a += q / n_mc as f64;
        }
    }
    CategoricalDist::new(avg)
}
