//! Parametric distribution primitives: diagonal Gaussians, categoricals,
//! one-dimensional empirical samples, and seeded random streams.
//!
//! All entropies are in nats.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of a probability vector's sum from 1 that is silently
/// renormalized.
pub const NORMALIZATION_SLACK: f64 = 1e-6;

/// `x log x` with the continuous extension `0 log 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// A Gaussian with independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: var.len(),
            });
        }
        if mean.is_empty() {
            return Err(Error::InvalidDistribution("zero-dimensional Gaussian".into()));
        }
        if let Some(m) = mean.iter().find(|m| !m.is_finite()) {
            return Err(Error::InvalidDistribution(format!("non-finite mean {m}")));
        }
        if let Some(v) = var.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "variance must be finite and positive, got {v}"
            )));
        }
        Ok(Self { mean, var })
    }

    /// Isotropic Gaussian `N(mean, var I)`.
    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, vec![var; d])
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn entropy(&self) -> f64 {
        entropy_gaussian(self)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((x, m), v)| -0.5 * ((2.0 * PI * v).ln() + (x - m) * (x - m) / v))
            .sum())
    }

    /// `n` draws via the standard-normal transform `mean + sd * z`.
    pub fn sample(&self, rng: &mut RngStream, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                self.mean
                    .iter()
                    .zip(&self.var)
                    .map(|(m, v)| m + v.sqrt() * rng.standard_normal())
                    .collect()
            })
            .collect()
    }
}

/// A probability vector over `J >= 1` outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    /// Validates `probs`. Sums within [`NORMALIZATION_SLACK`] of 1 are
    /// renormalized; larger deviations are rejected. Vectors already summing
    /// to 1 up to rounding are stored untouched.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -1e-12 || *p > 1.0 + 1e-12 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_SLACK {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        if (sum - 1.0).abs() > 1e-12 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { probs })
    }

    pub fn uniform(j: usize) -> Self {
        assert!(j >= 1, "categorical needs at least one outcome");
        Self {
            probs: vec![1.0 / j as f64; j],
        }
    }

    pub fn point_mass(j: usize, k: usize) -> Self {
        assert!(k < j, "point mass index out of range");
        let mut probs = vec![0.0; j];
        probs[k] = 1.0;
        Self { probs }
    }

    /// Softmax of `logits`, computed stably.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::InvalidDistribution("non-finite logits".into()));
        }
        let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = exps.iter().sum();
        Self::new(exps.into_iter().map(|e| e / s).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy_categorical(self)
    }

    /// Inverse-CDF sampling on the cumulative vector.
    pub fn sample(&self, rng: &mut RngStream, n: usize) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let last = self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        (0..n)
            .map(|_| {
                let u = rng.uniform() * acc;
                cdf.iter().position(|c| u < *c).unwrap_or(last).min(last)
            })
            .collect()
    }
}

impl<'de> Deserialize<'de> for CategoricalDist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            probs: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        CategoricalDist::new(raw.probs).map_err(serde::de::Error::custom)
    }
}

/// Sorted, finite sample values with implied uniform weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample1D {
    values: Vec<f64>,
}

impl EmpiricalSample1D {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite sample".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

/// Shannon entropy `-sum p log p` of a categorical.
pub fn entropy_categorical(p: &CategoricalDist) -> f64 {
    let h = -p.probs.iter().map(|&x| xlogx(x)).sum::<f64>();
    h.max(0.0)
}

/// Differential entropy `sum_i 0.5 log(2 pi e var_i)`.
pub fn entropy_gaussian(g: &DiagonalGaussian) -> f64 {
    g.var.iter().map(|v| 0.5 * (2.0 * PI * E * v).ln()).sum()
}

/// Closed-form `KL(q || p)` between diagonal Gaussians.
pub fn kl_diag_gaussians(q: &DiagonalGaussian, p: &DiagonalGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: p.dim(),
        });
    }
    let kl = q
        .mean
        .iter()
        .zip(&q.var)
        .zip(p.mean.iter().zip(&p.var))
        .map(|((mq, vq), (mp, vp))| {
            let d = mp - mq;
            0.5 * (vq / vp + d * d / vp - 1.0 + (vp / vq).ln())
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically derives a child seed from a parent seed and a path of
/// indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// An independent stream sharing this stream's seed.
    pub fn fork(&self, stream_id: u64) -> Self {
        Self::new(self.seed, derive_seed(self.stream_id, &[stream_id]))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
