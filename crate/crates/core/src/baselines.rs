//! Ensemble-of-BNNs (EBNN) baseline: the member predictives are collapsed
//! into a single distribution whose spread mixes aleatoric and epistemic
//! parts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibnn::{bonferroni_alpha, gaussian_hdr, PredictiveCredalSet, Region1D, RegionBox};
use crate::prob::CategoricalDist;

/// Moment summary of a Gaussian ensemble, per output dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mu_ens: Vec<f64>,
    /// Always `aleatoric_part + epistemic_part`.
    pub var_ens: Vec<f64>,
    pub k: usize,
    /// Mean member variance.
    pub aleatoric_part: Vec<f64>,
    /// Sample variance of member means (`k - 1` divisor, zero when `k = 1`).
    pub epistemic_part: Vec<f64>,
}

/// Combines `(mean, variance)` pairs into one Gaussian.
pub fn ebnn_combine(members: &[(Vec<f64>, Vec<f64>)]) -> Result<EnsembleSummary> {
    let (m0, _) = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("an ensemble needs at least one member".into()))?;
    let d = m0.len();
    for (mu, var) in members {
        for len in [mu.len(), var.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, got: len });
            }
        }
        if var.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("member moments must be finite with var >= 0".into()));
        }
    }
    let k = members.len();
    let kf = k as f64;
    let mut mu_ens = vec![0.0; d];
    let mut aleatoric_part = vec![0.0; d];
    for (mu, var) in members {
        for i in 0..d {
            mu_ens[i] += mu[i] / kf;
            aleatoric_part[i] += var[i] / kf;
        }
    }
    let mut epistemic_part = vec![0.0; d];
    if k > 1 {
        for (mu, _) in members {
            for i in 0..d {
                let r = mu[i] - mu_ens[i];
                epistemic_part[i] += r * r / (kf - 1.0);
            }
        }
    }
    let var_ens = aleatoric_part.iter().zip(&epistemic_part).map(|(a, e)| a + e).collect();
    Ok(EnsembleSummary {
        mu_ens,
        var_ens,
        k,
        aleatoric_part,
        epistemic_part,
    })
}

impl EnsembleSummary {
    /// Ensemble of the members of a regression predictive set.
    pub fn from_predictive(pred: &PredictiveCredalSet) -> Result<Self> {
        let members: Vec<(Vec<f64>, Vec<f64>)> = pred
            .as_regression()?
            .iter()
            .map(|m| (m.mean.clone(), m.var.clone()))
            .collect();
        ebnn_combine(&members)
    }

    pub fn dim(&self) -> usize {
        self.mu_ens.len()
    }
}

/// Gaussian HDR `mu_ens +/- z_{1-alpha/2} sqrt(var_ens)` per dimension.
pub fn ebnn_hdr(summary: &EnsembleSummary, alpha: f64) -> Result<Vec<Region1D>> {
    summary
        .mu_ens
        .iter()
        .zip(&summary.var_ens)
        .map(|(m, v)| gaussian_hdr(*m, *v, alpha))
        .collect()
}

/// Box with joint level `alpha`, each dimension at the Bonferroni level.
pub fn ebnn_box(summary: &EnsembleSummary, alpha: f64) -> Result<RegionBox> {
    let per_dim = bonferroni_alpha(alpha, summary.dim());
    RegionBox::new(alpha, ebnn_hdr(summary, per_dim)?)
}

/// Averaged class probabilities with a variance-based uncertainty split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleClassSummary {
    pub probs: CategoricalDist,
    pub k: usize,
    /// `sum_c mean_j p_jc (1 - p_jc)`: the expected Bernoulli variance of
    /// each class indicator.
    pub aleatoric: f64,
    /// `sum_c var_j(p_jc)` with a `k - 1` divisor, zero when `k = 1`.
    pub epistemic: f64,
}

/// Classification counterpart of [`ebnn_combine`].
pub fn ebnn_classify(members: &[CategoricalDist]) -> Result<EnsembleClassSummary> {
    let j = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("an ensemble needs at least one member".into()))?
        .len();
    if let Some(m) = members.iter().find(|m| m.len() != j) {
        return Err(Error::DimensionMismatch { expected: j, got: m.len() });
    }
    let k = members.len();
    let kf = k as f64;
    let mut avg = vec![0.0; j];
    let mut aleatoric = 0.0;
    for m in members {
        for (c, p) in m.probs().iter().enumerate() {
            avg[c] += p / kf;
            aleatoric += p * (1.0 - p) / kf;
        }
    }
    let mut epistemic = 0.0;
    if k > 1 {
        for m in members {
            for (c, p) in m.probs().iter().enumerate() {
                epistemic += (p - avg[c]).powi(2) / (kf - 1.0);
            }
        }
    }
    Ok(EnsembleClassSummary {
        probs: CategoricalDist::new(avg)?,
        k,
        aleatoric,
        epistemic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibnn::{normal_quantile, Interval};
    use crate::prob::RngStream;

    #[test]
    fn combine_examples() {
        let s = ebnn_combine(&[(vec![0.7], vec![2.5])]).unwrap();
        assert_eq!((s.mu_ens[0], s.var_ens[0], s.aleatoric_part[0], s.epistemic_part[0]), (0.7, 2.5, 2.5, 0.0));

        let s = ebnn_combine(&[(vec![0.0], vec![1.0]), (vec![2.0], vec![1.0])]).unwrap();
        assert_eq!((s.mu_ens[0], s.aleatoric_part[0], s.epistemic_part[0], s.var_ens[0]), (1.0, 1.0, 2.0, 3.0));

        let r = &ebnn_hdr(&s, 0.05).unwrap()[0];
        let z = normal_quantile(0.975);
        assert!((r.intervals()[0].lo - (1.0 - z * 3f64.sqrt())).abs() < 1e-12);
        assert!((r.intervals()[0].lo - (1.0 - 1.96 * 3f64.sqrt())).abs() < 1e-3);

        let same = ebnn_combine(&vec![(vec![1.0, 2.0], vec![0.5, 0.5]); 4]).unwrap();
        assert_eq!(same.epistemic_part, vec![0.0, 0.0]);
        let member = gaussian_hdr(1.0, 0.5, 0.1).unwrap();
        assert_eq!(ebnn_hdr(&same, 0.1).unwrap()[0], member);
    }

    #[test]
    fn decomposition_identity_on_random_ensembles() {
        let mut rng = RngStream::new(17, 0);
        for _ in 0..500 {
            let k = 1 + rng.index(6);
            let d = 1 + rng.index(4);
            let members: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
                .map(|_| {
                    (
                        (0..d).map(|_| 10.0 * rng.standard_normal()).collect(),
                        (0..d).map(|_| rng.uniform_range(0.0, 5.0)).collect(),
                    )
                })
                .collect();
            let s = ebnn_combine(&members).unwrap();
            for i in 0..d {
                assert!((s.var_ens[i] - s.aleatoric_part[i] - s.epistemic_part[i]).abs() <= 1e-12 * s.var_ens[i].max(1.0));
                assert!(s.aleatoric_part[i] >= 0.0 && s.epistemic_part[i] >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_members() {
        assert!(ebnn_combine(&[]).is_err());
        assert!(ebnn_combine(&[(vec![0.0], vec![1.0]), (vec![0.0, 1.0], vec![1.0, 1.0])]).is_err());
        assert!(ebnn_combine(&[(vec![0.0], vec![-1.0])]).is_err());
    }

    /// Union length of equal-variance Gaussian HDRs whose intervals overlap
    /// pairwise: one interval from the smallest to the largest mean.
    fn union_length(means: &[f64], sd: f64, z: f64) -> f64 {
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo + 2.0 * z * sd
    }

    #[test]
    fn union_is_broader_when_means_are_close() {
        // With range r and k members, var_ens <= sd^2 + k r^2 / (4 (k - 1)),
        // and sqrt(a + b) <= sqrt(a) + b / (2 sqrt(a)); so the EBNN HDR is no
        // longer than the union whenever r <= 4 (k - 1) sd / (z k).
        let mut rng = RngStream::new(5, 0);
        for _ in 0..2000 {
            let k = 2 + rng.index(6);
            let sd = rng.uniform_range(0.1, 3.0);
            let alpha = [0.01, 0.05, 0.1][rng.index(3)];
            let z = normal_quantile(1.0 - alpha / 2.0);
            let r_max = 4.0 * (k as f64 - 1.0) * sd / (z * k as f64);
            let base = rng.standard_normal();
            let means: Vec<f64> = (0..k).map(|_| base + rng.uniform_range(0.0, r_max)).collect();
            let members: Vec<_> = means.iter().map(|m| (vec![*m], vec![sd * sd])).collect();
            let s = ebnn_combine(&members).unwrap();
            let ebnn_len = ebnn_hdr(&s, alpha).unwrap()[0].total_length();
            let hdrs: Vec<Region1D> = means.iter().map(|m| gaussian_hdr(*m, sd * sd, alpha).unwrap()).collect();
            let ihdr = Region1D::union(&hdrs).unwrap();
            assert_eq!(ihdr.intervals().len(), 1);
            assert!((ihdr.total_length() - union_length(&means, sd, z)).abs() < 1e-9);
            assert!(ihdr.total_length() >= ebnn_len - 1e-12, "k={k} sd={sd} alpha={alpha}");
        }
    }

    #[test]
    fn union_can_be_narrower_for_touching_hdrs() {
        // Two unit-variance members whose 95% HDRs just touch.
        let z = normal_quantile(0.975);
        let means = [0.0, 2.0 * z];
        let s = ebnn_combine(&[(vec![means[0]], vec![1.0]), (vec![means[1]], vec![1.0])]).unwrap();
        let ebnn = &ebnn_hdr(&s, 0.05).unwrap()[0];
        let ihdr = Region1D::union(&[gaussian_hdr(means[0], 1.0, 0.05).unwrap(), gaussian_hdr(means[1], 1.0, 0.05).unwrap()]).unwrap();
        assert_eq!(ihdr.intervals(), &[Interval::new(-z, 3.0 * z)]);
        // 2 z sqrt(1 + 2 z^2) > 4 z.
        assert!((ebnn.total_length() - 2.0 * z * (1.0 + 2.0 * z * z).sqrt()).abs() < 1e-12);
        assert!(ebnn.total_length() > ihdr.total_length());
    }

    #[test]
    fn classification_split() {
        let a = CategoricalDist::new(vec![0.9, 0.1]).unwrap();
        let b = CategoricalDist::new(vec![0.5, 0.5]).unwrap();
        let s = ebnn_classify(&[a.clone(), b]).unwrap();
        assert!((s.probs.probs()[0] - 0.7).abs() < 1e-12);
        // Hand evaluation: mean of p(1-p) summed over both classes.
        assert!((s.aleatoric - (2.0 * 0.09 + 2.0 * 0.25) / 2.0).abs() < 1e-12);
        // Each class: deviations +-0.2, sample variance 0.08.
        assert!((s.epistemic - 0.16).abs() < 1e-12);
        let single = ebnn_classify(&[a]).unwrap();
        assert_eq!(single.epistemic, 0.0);
    }
}
