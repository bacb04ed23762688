//! ELBO estimation with reparameterized gradients, and Adam-based training.

use std::f64::consts::PI;

use super::mlp::Workspace;
use super::{Dataset, GaussianPriorSpec, Head, MeanFieldPosterior, MlpArchitecture, Targets, TrainConfig, TrainingMetadata, INIT_LOG_VAR};
use crate::error::{Error, Result};
use crate::prob::RngStream;

/// Standard-normal draws `eps` for the reparameterization
/// `theta = mean + exp(log_var / 2) * eps`, one vector per MC sample.
///
/// Holding these fixed gives common random numbers across ELBO evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamNoise {
    draws: Vec<Vec<f64>>,
}

impl ReparamNoise {
    pub fn sample(rng: &mut RngStream, mc_samples: usize, param_count: usize) -> Self {
        Self {
            draws: (0..mc_samples)
                .map(|_| (0..param_count).map(|_| rng.standard_normal()).collect())
                .collect(),
        }
    }

    pub fn from_draws(draws: Vec<Vec<f64>>) -> Self {
        Self { draws }
    }

    pub fn mc_samples(&self) -> usize {
        self.draws.len()
    }
}

/// ELBO value with its gradient in the variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    pub expected_log_lik: f64,
    pub kl: f64,
    pub grad_mean: Vec<f64>,
    pub grad_log_var: Vec<f64>,
}

struct VariationalView<'a> {
    arch: &'a MlpArchitecture,
    mean: &'a [f64],
    log_var: &'a [f64],
    noise_var: f64,
}

/// Log-likelihood of one example, writing d(loglik)/d(output) into `d_out`.
#[inline]
fn log_lik_and_grad(head: Head, out: &[f64], data: &Dataset, i: usize, noise_var: f64, d_out: &mut [f64]) -> f64 {
    match (head, data.targets()) {
        (Head::GaussianRegression, Targets::Real(rows)) => {
            let y = &rows[i];
            let mut ll = 0.0;
            for ((d, o), t) in d_out.iter_mut().zip(out).zip(y) {
                let r = t - o;
                ll -= 0.5 * ((2.0 * PI * noise_var).ln() + r * r / noise_var);
                *d = r / noise_var;
            }
            ll
        }
        (Head::CategoricalSoftmax, Targets::Labels(labels)) => {
            let y = labels[i];
            let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = out.iter().map(|z| (z - m).exp()).sum();
            let lse = m + s.ln();
            for (k, (d, z)) in d_out.iter_mut().zip(out).enumerate() {
                let p = (z - lse).exp();
                *d = if k == y { 1.0 - p } else { -p };
            }
            out[y] - lse
        }
        _ => unreachable!("compatibility is checked before estimation"),
    }
}

fn estimate(
    view: &VariationalView<'_>,
    prior: &GaussianPriorSpec,
    data: &Dataset,
    batch: &[usize],
    noise: &ReparamNoise,
    dataset_size: usize,
    ws: &mut Workspace,
) -> ElboEstimate {
    let p = view.mean.len();
    let sd: Vec<f64> = view.log_var.iter().map(|l| (0.5 * l).exp()).collect();
    let mut grad_mean = vec![0.0; p];
    let mut grad_log_var = vec![0.0; p];
    let mut theta = vec![0.0; p];
    let mut g_theta = vec![0.0; p];
    let mut d_out = vec![0.0; view.arch.output_dim()];
    let scale = dataset_size as f64 / batch.len() as f64;
    let inv_s = 1.0 / noise.mc_samples() as f64;
    let mut expected_ll = 0.0;

    for eps in &noise.draws {
        for k in 0..p {
            theta[k] = view.mean[k] + sd[k] * eps[k];
        }
        g_theta.iter_mut().for_each(|g| *g = 0.0);
        let mut ll = 0.0;
        for &i in batch {
            let out = view.arch.forward_ws(&theta, &data.inputs()[i], ws);
            ll += log_lik_and_grad(view.arch.head(), out, data, i, view.noise_var, &mut d_out);
            view.arch.backward_ws(&theta, ws, &d_out, &mut g_theta);
        }
        expected_ll += scale * ll * inv_s;
        let w = scale * inv_s;
        for k in 0..p {
            let g = w * g_theta[k];
            grad_mean[k] += g;
            grad_log_var[k] += g * eps[k] * 0.5 * sd[k];
        }
    }

    let mu_p = prior.mean_value();
    let var_p = prior.var;
    let mut kl = 0.0;
    for k in 0..p {
        let v = view.log_var[k].exp();
        let d = view.mean[k] - mu_p;
        kl += 0.5 * (v / var_p + d * d / var_p - 1.0 + var_p.ln() - view.log_var[k]);
        grad_mean[k] -= d / var_p;
        grad_log_var[k] -= 0.5 * (v / var_p - 1.0);
    }

    ElboEstimate {
        value: expected_ll - kl,
        expected_log_lik: expected_ll,
        kl,
        grad_mean,
        grad_log_var,
    }
}

/// ELBO and its gradient on `batch` with fixed reparameterization noise:
/// `(dataset_size / |batch|) E_q[log p(batch | theta)] - KL(q || prior)`.
pub fn elbo_with_gradient(
    posterior: &MeanFieldPosterior,
    prior: &GaussianPriorSpec,
    batch: &Dataset,
    noise: &ReparamNoise,
    dataset_size: usize,
) -> Result<ElboEstimate> {
    batch.check_compatible(posterior.architecture())?;
    if noise.mc_samples() == 0 || noise.draws.iter().any(|d| d.len() != posterior.param_count()) {
        return Err(Error::InvalidArgument(
            "reparameterization noise must hold one full-length draw per MC sample".into(),
        ));
    }
    let view = VariationalView {
        arch: posterior.architecture(),
        mean: posterior.mean(),
        log_var: posterior.log_var(),
        noise_var: posterior.noise_var().unwrap_or(1.0),
    };
    let idx: Vec<usize> = (0..batch.len()).collect();
    let mut ws = view.arch.workspace();
    Ok(estimate(&view, prior, batch, &idx, noise, dataset_size, &mut ws))
}

/// Monte-Carlo ELBO estimate with `mc_samples` reparameterized draws.
pub fn elbo(
    posterior: &MeanFieldPosterior,
    prior: &GaussianPriorSpec,
    batch: &Dataset,
    rng: &mut RngStream,
    mc_samples: usize,
    dataset_size: usize,
) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::InvalidArgument("mc_samples must be positive".into()));
    }
    let noise = ReparamNoise::sample(rng, mc_samples, posterior.param_count());
    Ok(elbo_with_gradient(posterior, prior, batch, &noise, dataset_size)?.value)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    /// Gradient ascent step on `params`.
    fn ascend(&mut self, params: &mut [f64], grads: [&[f64]; 2]) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        let grads = grads[0].iter().chain(grads[1]);
        for (((p, m), v), g) in params.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grads) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p += self.lr * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a mean-field posterior by stochastic ELBO ascent.
///
/// Means start at `N(0, 2 / fan_in)` for weights and zero for biases;
/// log-variances start at `ln(1e-2)`. Everything is a deterministic function
/// of `cfg.seed`.
pub fn train_vi(
    arch: &MlpArchitecture,
    prior: &GaussianPriorSpec,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<MeanFieldPosterior> {
    cfg.validate()?;
    prior.validate()?;
    data.check_compatible(arch)?;

    let p = arch.param_count();
    let mut init_rng = RngStream::new(cfg.seed, 0);
    let mean: Vec<f64> = arch
        .param_roles()
        .into_iter()
        .map(|(fan_in, is_bias)| {
            if is_bias {
                0.0
            } else {
                (2.0 / fan_in as f64).sqrt() * init_rng.standard_normal()
            }
        })
        .collect();
    // One buffer: means followed by log-variances.
    let mut params = mean;
    params.extend(std::iter::repeat_n(INIT_LOG_VAR, p));

    let noise_var = match arch.head() {
        Head::GaussianRegression => cfg.likelihood_noise_var,
        Head::CategoricalSoftmax => 1.0,
    };
    let mut rng = RngStream::new(cfg.seed, 1);
    let mut adam = Adam::new(2 * p, cfg.learning_rate);
    let mut ws = arch.workspace();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let noise = ReparamNoise::sample(&mut rng, cfg.mc_samples_per_step, p);
            let (mean, log_var) = params.split_at(p);
            let view = VariationalView {
                arch,
                mean,
                log_var,
                noise_var,
            };
            let est = estimate(&view, prior, data, batch, &noise, data.len(), &mut ws);
            if !est.value.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.ascend(&mut params, [&est.grad_mean, &est.grad_log_var]);
            if params.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            total += est.value;
            batches += 1;
        }
        history.push(total / batches as f64);
    }

    let log_var = params.split_off(p);
    let final_elbo = history.last().copied().unwrap_or(f64::NAN);
    MeanFieldPosterior::new(
        arch.clone(),
        params,
        log_var,
        (arch.head() == Head::GaussianRegression).then_some(noise_var),
        TrainingMetadata {
            seed: cfg.seed,
            final_elbo,
            epochs: cfg.epochs,
            elbo_history: history,
        },
    )
}
