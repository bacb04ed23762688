//! Predictive credal sets and the regions and uncertainty summaries derived
//! from them.

use serde::{Deserialize, Serialize};

use super::region::{check_alpha, empirical_shortest_hdr, gaussian_hdr, grid_density_hdr, HdrMethod, Region1D};
use super::PosteriorCredalSet;
use crate::bnn::{predictive_classification, predictive_regression, Head, RegressionPredictive};
use crate::credal::{FiniteCredalSet, UncertaintySplit};
use crate::error::{Error, Result};
use crate::prob::{entropy_gaussian, CategoricalDist, DiagonalGaussian, RngStream};

/// Monte-Carlo draws per member when none are specified.
pub const DEFAULT_N_MC: usize = 20;

/// One predictive distribution per trained posterior, all at the same input.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveCredalSet {
    Regression(Vec<RegressionPredictive>),
    Classification(Vec<CategoricalDist>),
}

impl PredictiveCredalSet {
    pub fn regression(members: Vec<RegressionPredictive>) -> Result<Self> {
        let d = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("predictive set is empty".into()))?
            .dim();
        for m in &members {
            if m.dim() != d || m.var.len() != d || m.samples.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
            }
        }
        Ok(Self::Regression(members))
    }

    pub fn classification(members: Vec<CategoricalDist>) -> Result<Self> {
        let j = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("predictive set is empty".into()))?
            .len();
        if let Some(m) = members.iter().find(|m| m.len() != j) {
            return Err(Error::DimensionMismatch { expected: j, got: m.len() });
        }
        Ok(Self::Classification(members))
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Regression(m) => m.len(),
            Self::Classification(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output dimension for regression, number of classes for classification.
    pub fn output_dim(&self) -> usize {
        match self {
            Self::Regression(m) => m[0].dim(),
            Self::Classification(m) => m[0].len(),
        }
    }

    pub fn as_regression(&self) -> Result<&[RegressionPredictive]> {
        match self {
            Self::Regression(m) => Ok(m),
            Self::Classification(_) => Err(Error::InvalidArgument("expected a regression predictive set".into())),
        }
    }

    pub fn as_classification(&self) -> Result<&[CategoricalDist]> {
        match self {
            Self::Classification(m) => Ok(m),
            Self::Regression(_) => Err(Error::InvalidArgument(
                "expected a classification predictive set".into(),
            )),
        }
    }
}

/// Predictive distribution of every member at `x`, each sampled through its
/// own likelihood. Members consume `rng` in order.
pub fn predictive_credal_set(
    pcs: &PosteriorCredalSet,
    x: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<PredictiveCredalSet> {
    match pcs.head() {
        Head::GaussianRegression => PredictiveCredalSet::regression(
            pcs.posteriors()
                .map(|p| predictive_regression(p, x, n_mc, rng))
                .collect::<Result<_>>()?,
        ),
        Head::CategoricalSoftmax => PredictiveCredalSet::classification(
            pcs.posteriors()
                .map(|p| predictive_classification(p, x, n_mc, rng))
                .collect::<Result<_>>()?,
        ),
    }
}

/// HDR of output `dim` of one member's predictive.
pub fn hdr_1d(summary: &RegressionPredictive, dim: usize, alpha: f64, method: HdrMethod) -> Result<Region1D> {
    if dim >= summary.dim() {
        return Err(Error::DimensionMismatch {
            expected: summary.dim(),
            got: dim,
        });
    }
    match method {
        HdrMethod::Gaussian => gaussian_hdr(summary.mean[dim], summary.var[dim], alpha),
        HdrMethod::EmpiricalShortest => empirical_shortest_hdr(&summary.samples[dim], alpha),
        HdrMethod::GridDensity => grid_density_hdr(&summary.samples[dim], alpha),
    }
}

/// Per-dimension union of the member HDRs at level `alpha`.
pub fn ihdr(pred: &PredictiveCredalSet, alpha: f64, method: HdrMethod) -> Result<Vec<Region1D>> {
    let members = pred.as_regression()?;
    (0..pred.output_dim())
        .map(|k| {
            let hdrs = members
                .iter()
                .map(|m| hdr_1d(m, k, alpha, method))
                .collect::<Result<Vec<_>>>()?;
            Region1D::union(&hdrs)
        })
        .collect()
}

/// Axis-aligned product of per-dimension regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    /// Level targeted for the whole box.
    pub joint_alpha: f64,
    /// Level used in each dimension.
    pub per_dim_alpha: f64,
    /// Whether the Bonferroni split `joint_alpha / d` was applied.
    pub bonferroni: bool,
    pub dims: Vec<Region1D>,
}

impl RegionBox {
    /// Builds a box from regions already computed at `per_dim_alpha`.
    pub fn new(joint_alpha: f64, dims: Vec<Region1D>) -> Result<Self> {
        check_alpha(joint_alpha)?;
        if dims.is_empty() {
            return Err(Error::InvalidArgument("a box needs at least one dimension".into()));
        }
        let per_dim_alpha = dims[0].level();
        Ok(Self {
            joint_alpha,
            per_dim_alpha,
            bonferroni: dims.len() > 1,
            dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dims.len() && self.dims.iter().zip(y).all(|(r, v)| r.contains(*v))
    }

    /// Mean of the per-dimension region lengths.
    pub fn mean_width(&self) -> f64 {
        self.dims.iter().map(Region1D::total_length).sum::<f64>() / self.dims.len() as f64
    }
}

/// Level each of `d` dimensions must meet for a box to reach `alpha` jointly.
pub fn bonferroni_alpha(alpha: f64, d: usize) -> f64 {
    alpha / d.max(1) as f64
}

/// IHDR box whose joint lower coverage is at least `1 - alpha`, by running
/// every dimension at `alpha / d`.
pub fn ihdr_box(pred: &PredictiveCredalSet, alpha: f64, method: HdrMethod) -> Result<RegionBox> {
    check_alpha(alpha)?;
    let per_dim = bonferroni_alpha(alpha, pred.output_dim());
    RegionBox::new(alpha, ihdr(pred, per_dim, method)?)
}

/// Aleatoric part as the smallest member entropy and epistemic part as the
/// spread between largest and smallest. Regression members are moment-matched
/// to diagonal Gaussians.
pub fn predictive_au_eu(pred: &PredictiveCredalSet) -> Result<UncertaintySplit> {
    match pred {
        PredictiveCredalSet::Classification(members) => Ok(FiniteCredalSet::new(members.clone())?.au_eu()),
        PredictiveCredalSet::Regression(members) => {
            let hs = members
                .iter()
                .map(|m| Ok(entropy_gaussian(&DiagonalGaussian::new(m.mean.clone(), m.var.clone())?)))
                .collect::<Result<Vec<f64>>>()?;
            let lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(UncertaintySplit::from_entropies(lo, hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibnn::Interval;
    use crate::prob::EmpiricalSample1D;

    fn gaussian_member(mean: f64, var: f64, rng: &mut RngStream) -> RegressionPredictive {
        let samples = (0..200).map(|_| mean + var.sqrt() * rng.standard_normal()).collect();
        RegressionPredictive {
            mean: vec![mean],
            var: vec![var],
            samples: vec![EmpiricalSample1D::new(samples).unwrap()],
        }
    }

    #[test]
    fn union_examples() {
        let mut rng = RngStream::new(0, 0);
        let z = crate::ibnn::normal_quantile(0.975);
        // Members whose 95% HDRs are exactly [-1, 1] and [4, 6].
        let sd = 1.0 / z;
        let pred = PredictiveCredalSet::regression(vec![
            gaussian_member(0.0, sd * sd, &mut rng),
            gaussian_member(5.0, sd * sd, &mut rng),
        ])
        .unwrap();
        let r = &ihdr(&pred, 0.05, HdrMethod::Gaussian).unwrap()[0];
        assert_eq!(r.intervals().len(), 2);
        assert!((r.intervals()[0].lo + 1.0).abs() < 1e-12 && (r.intervals()[1].hi - 6.0).abs() < 1e-12);

        // [-1, 1] and [0.5, 2] merge.
        let sd2 = 0.75 / z;
        let pred = PredictiveCredalSet::regression(vec![
            gaussian_member(0.0, sd * sd, &mut rng),
            gaussian_member(1.25, sd2 * sd2, &mut rng),
        ])
        .unwrap();
        let r = &ihdr(&pred, 0.05, HdrMethod::Gaussian).unwrap()[0];
        assert_eq!(r.intervals().len(), 1);
        let Interval { lo, hi } = r.intervals()[0];
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_members_give_member_hdr() {
        let mut rng = RngStream::new(1, 0);
        let m = gaussian_member(0.3, 2.0, &mut rng);
        let pred = PredictiveCredalSet::regression(vec![m.clone(), m.clone(), m.clone()]).unwrap();
        for method in [HdrMethod::Gaussian, HdrMethod::EmpiricalShortest, HdrMethod::GridDensity] {
            let single = hdr_1d(&m, 0, 0.1, method).unwrap();
            assert_eq!(ihdr(&pred, 0.1, method).unwrap()[0], single);
        }
    }

    #[test]
    fn ihdr_contains_members_and_is_monotone_in_alpha() {
        let mut rng = RngStream::new(2, 0);
        let members: Vec<_> = (0..5)
            .map(|_| gaussian_member(rng.uniform_range(-3.0, 3.0), rng.uniform_range(0.1, 2.0), &mut rng))
            .collect();
        let pred = PredictiveCredalSet::regression(members.clone()).unwrap();
        for method in [HdrMethod::Gaussian, HdrMethod::EmpiricalShortest] {
            let mut prev: Option<Region1D> = None;
            for alpha in [0.01, 0.05, 0.1, 0.3] {
                let r = ihdr(&pred, alpha, method).unwrap().remove(0);
                for m in &members {
                    assert!(r.covers(&hdr_1d(m, 0, alpha, method).unwrap()));
                }
                // Nesting across levels is exact for the Gaussian method only;
                // shortest sample windows can jump between clusters.
                if let (Some(p), HdrMethod::Gaussian) = (&prev, method) {
                    assert!(p.covers(&r), "alpha {alpha}");
                }
                prev = Some(r);
            }
        }
    }

    #[test]
    fn bonferroni_box() {
        let mut rng = RngStream::new(3, 0);
        let two_d = RegressionPredictive {
            mean: vec![0.0, 1.0],
            var: vec![1.0, 4.0],
            samples: vec![
                EmpiricalSample1D::new((0..50).map(|_| rng.standard_normal()).collect()).unwrap(),
                EmpiricalSample1D::new((0..50).map(|_| rng.standard_normal()).collect()).unwrap(),
            ],
        };
        let pred = PredictiveCredalSet::regression(vec![two_d]).unwrap();
        let b = ihdr_box(&pred, 0.1, HdrMethod::Gaussian).unwrap();
        assert!(b.bonferroni);
        assert_eq!(b.per_dim_alpha, 0.05);
        assert!((b.dims[0].hull().hi - crate::ibnn::normal_quantile(0.975)).abs() < 1e-12);
        assert!(b.contains(&[0.0, 1.0]));
        assert!(!b.contains(&[0.0, 100.0]));
        assert!(!b.contains(&[0.0]));
    }

    #[test]
    fn au_eu_examples() {
        let pred = PredictiveCredalSet::classification(vec![CategoricalDist::uniform(10), CategoricalDist::point_mass(10, 3)]).unwrap();
        let s = predictive_au_eu(&pred).unwrap();
        assert_eq!(s.aleatoric, 0.0);
        assert!((s.epistemic - 10f64.ln()).abs() < 1e-12);

        let mut rng = RngStream::new(4, 0);
        let e2 = std::f64::consts::E.powi(2);
        let pred = PredictiveCredalSet::regression(vec![gaussian_member(0.0, 1.0, &mut rng), gaussian_member(3.0, e2, &mut rng)]).unwrap();
        let s = predictive_au_eu(&pred).unwrap();
        assert!((s.epistemic - 1.0).abs() < 1e-12);
        let oracle_h = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((s.aleatoric - oracle_h).abs() < 1e-12);

        let single = PredictiveCredalSet::regression(vec![gaussian_member(0.0, 1.0, &mut rng)]).unwrap();
        assert_eq!(predictive_au_eu(&single).unwrap().epistemic, 0.0);
    }

    #[test]
    fn mixed_or_empty_sets_rejected() {
        assert!(PredictiveCredalSet::regression(vec![]).is_err());
        assert!(PredictiveCredalSet::classification(vec![CategoricalDist::uniform(2), CategoricalDist::uniform(3)]).is_err());
        let pred = PredictiveCredalSet::classification(vec![CategoricalDist::uniform(2)]).unwrap();
        assert!(ihdr(&pred, 0.1, HdrMethod::Gaussian).is_err());
    }
}
