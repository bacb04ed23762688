//! Credible label sets for classification and their imprecise union.

use serde::{Deserialize, Serialize};

use super::predictive::PredictiveCredalSet;
use super::region::check_alpha;
use crate::error::{Error, Result};
use crate::prob::CategoricalDist;

/// Labels (ascending) and the probability mass they carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleLabelSet {
    pub labels: Vec<usize>,
    /// Mass of `labels`; for an imprecise set, the smallest member mass.
    pub achieved_mass: f64,
}

impl CredibleLabelSet {
    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Mass of `labels` (ascending) under `p`, always summed in label order so
/// that a superset never reports less mass than a subset.
pub fn mass_of(p: &CategoricalDist, labels: &[usize]) -> f64 {
    labels.iter().map(|&l| p.probs()[l]).sum()
}

/// Smallest prefix of the labels, ordered by decreasing probability (ties by
/// index), whose mass reaches `1 - alpha`.
pub fn credible_set(p: &CategoricalDist, alpha: f64) -> Result<CredibleLabelSet> {
    check_alpha(alpha)?;
    let probs = p.probs();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let target = 1.0 - alpha;
    let mut labels = Vec::with_capacity(probs.len());
    let mut mass = 0.0;
    for l in order {
        let pos = labels.partition_point(|&x| x < l);
        labels.insert(pos, l);
        mass = mass_of(p, &labels);
        if mass >= target {
            break;
        }
    }
    Ok(CredibleLabelSet {
        labels,
        achieved_mass: mass,
    })
}

/// Union of the members' credible sets, with the smallest member mass on it.
pub fn imprecise_credible_set_of(members: &[CategoricalDist], alpha: f64) -> Result<CredibleLabelSet> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("no members".into()))?;
    let mut in_union = vec![false; first.len()];
    for m in members {
        if m.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: m.len(),
            });
        }
        for l in credible_set(m, alpha)?.labels {
            in_union[l] = true;
        }
    }
    let labels: Vec<usize> = (0..in_union.len()).filter(|&l| in_union[l]).collect();
    let achieved_mass = members
        .iter()
        .map(|m| mass_of(m, &labels))
        .fold(f64::INFINITY, f64::min);
    Ok(CredibleLabelSet { labels, achieved_mass })
}

pub fn imprecise_credible_set(pred: &PredictiveCredalSet, alpha: f64) -> Result<CredibleLabelSet> {
    imprecise_credible_set_of(pred.as_classification()?, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngStream;

    fn cat(v: &[f64]) -> CategoricalDist {
        CategoricalDist::new(v.to_vec()).unwrap()
    }

    /// Enumerates prefixes of the probability-sorted labels.
    fn prefix_oracle(p: &[f64], alpha: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
        for k in 1..=p.len() {
            let s: f64 = idx[..k].iter().map(|&i| p[i]).sum();
            if s >= 1.0 - alpha - 1e-12 {
                let mut out = idx[..k].to_vec();
                out.sort();
                return out;
            }
        }
        idx
    }

    #[test]
    fn credible_set_examples() {
        let p = cat(&[0.6, 0.3, 0.1]);
        let cs = credible_set(&p, 0.5).unwrap();
        assert_eq!(cs.labels, vec![0]);
        assert_eq!(cs.achieved_mass, 0.6);
        let cs = credible_set(&p, 0.3).unwrap();
        assert_eq!(cs.labels, vec![0, 1]);
        assert!((cs.achieved_mass - 0.9).abs() < 1e-12);
        let cs = credible_set(&p, 0.05).unwrap();
        assert_eq!(cs.labels, vec![0, 1, 2]);
        assert!((cs.achieved_mass - 1.0).abs() < 1e-12);
        for (a, want) in [(0.5, vec![0]), (0.3, vec![0, 1]), (0.05, vec![0, 1, 2])] {
            assert_eq!(prefix_oracle(p.probs(), a), want);
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let cs = credible_set(&cat(&[0.25, 0.5, 0.25]), 0.4).unwrap();
        assert_eq!(cs.labels, vec![0, 1]);
    }

    #[test]
    fn imprecise_examples() {
        let a = cat(&[0.6, 0.3, 0.1]);
        let b = cat(&[0.1, 0.3, 0.6]);
        let ics = imprecise_credible_set_of(&[a.clone(), b], 0.3).unwrap();
        assert_eq!(ics.labels, vec![0, 1, 2]);
        assert_eq!(imprecise_credible_set_of(std::slice::from_ref(&a), 0.3).unwrap(), credible_set(&a, 0.3).unwrap());
        assert!(imprecise_credible_set_of(&[], 0.3).is_err());
        assert!(credible_set(&a, 0.0).is_err());
    }

    #[test]
    fn random_members_reach_the_level_exactly() {
        let mut rng = RngStream::new(9, 0);
        for _ in 0..2000 {
            let j = 2 + rng.index(8);
            let n = 1 + rng.index(6);
            let members: Vec<CategoricalDist> = (0..n)
                .map(|_| {
                    let w: Vec<f64> = (0..j).map(|_| -rng.uniform().ln()).collect();
                    let s: f64 = w.iter().sum();
                    cat(&w.iter().map(|x| x / s).collect::<Vec<_>>())
                })
                .collect();
            let alpha = rng.uniform_range(0.001, 0.5);
            let ics = imprecise_credible_set_of(&members, alpha).unwrap();
            for m in &members {
                let own = credible_set(m, alpha).unwrap();
                assert!(own.achieved_mass >= 1.0 - alpha);
                assert!(own.labels.iter().all(|l| ics.contains(*l)));
                assert!(mass_of(m, &ics.labels) >= 1.0 - alpha);
            }
            assert!(ics.achieved_mass >= 1.0 - alpha);
        }
    }
}
