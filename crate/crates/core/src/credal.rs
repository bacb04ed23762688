//! Finitely generated credal sets on a finite outcome space.
//!
//! A [`FiniteCredalSet`] is represented by its extreme points. Upper and
//! lower probabilities of an event are attained at extremes, so every
//! operation here only ever touches the stored extremes; the convex hull is
//! never materialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_categorical, CategoricalDist};

/// Tolerance used when comparing probability vectors for redundancy.
const REDUNDANCY_TOL: f64 = 1e-9;

/// A subset of a finite outcome space `{0, .., J-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMask {
    bits: Vec<bool>,
}

impl EventMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(j: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; j];
        for &i in indices {
            if i >= j {
                return Err(Error::InvalidArgument(format!(
                    "outcome {i} outside space of size {j}"
                )));
            }
            bits[i] = true;
        }
        Ok(Self { bits })
    }

    pub fn full(j: usize) -> Self {
        Self {
            bits: vec![true; j],
        }
    }

    pub fn empty(j: usize) -> Self {
        Self {
            bits: vec![false; j],
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits.get(i).copied().unwrap_or(false)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `P(A)` for a single distribution.
    pub fn probability(&self, p: &CategoricalDist) -> Result<f64> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: self.len(),
            });
        }
        Ok(p.probs()
            .iter()
            .zip(&self.bits)
            .filter(|(_, b)| **b)
            .map(|(p, _)| p)
            .sum())
    }
}

/// Which envelope of the credal set to integrate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacity {
    Upper,
    Lower,
}

/// Aleatoric / epistemic split of total (upper) entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySplit {
    pub aleatoric: f64,
    pub epistemic: f64,
}

impl UncertaintySplit {
    pub fn total(&self) -> f64 {
        self.aleatoric + self.epistemic
    }

    /// Split from the lower and upper entropies; `eu = upper - lower`.
    pub fn from_entropies(lower: f64, upper: f64) -> Self {
        Self {
            aleatoric: lower,
            epistemic: (upper - lower).max(0.0),
        }
    }
}

/// Entropies of the upper and lower envelopes; `h_of_upper` may be
/// `f64::INFINITY` when some outcome has zero lower probability but positive
/// upper probability. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBounds {
    pub h_of_upper: f64,
    pub h_of_lower: f64,
}

/// Result of the redundant-extreme diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyReport {
    /// Indices of extremes that are (within tolerance) convex combinations
    /// of the others.
    pub redundant: Vec<usize>,
    /// Whether the check was exhaustive. Only sets with at most three
    /// extremes are checked exhaustively; larger sets are only screened for
    /// duplicates.
    pub exhaustive: bool,
}

/// Distance or divergence between categorical distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    TotalVariation,
    /// `KL(member || reference)`; infinite when the member puts mass where
    /// the reference has none.
    Kl,
}

impl Divergence {
    pub fn between(self, p: &CategoricalDist, q: &CategoricalDist) -> Result<f64> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        Ok(match self {
            Divergence::TotalVariation => {
                0.5 * p
                    .probs()
                    .iter()
                    .zip(q.probs())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            }
            Divergence::Kl => {
                let mut kl = 0.0;
                for (&a, &b) in p.probs().iter().zip(q.probs()) {
                    if a > 0.0 {
                        if b <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        kl += a * (a / b).ln();
                    }
                }
                kl.max(0.0)
            }
        })
    }
}

/// A credal set given by finitely many extreme distributions of equal
/// dimension.
///
/// Minimality of the extremes is not enforced; see
/// [`FiniteCredalSet::redundant_extremes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteCredalSet {
    extremes: Vec<CategoricalDist>,
}

impl FiniteCredalSet {
    pub fn new(extremes: Vec<CategoricalDist>) -> Result<Self> {
        let first = extremes
            .first()
            .ok_or_else(|| Error::InvalidArgument("credal set needs at least one extreme".into()))?;
        let j = first.len();
        if let Some(bad) = extremes.iter().find(|e| e.len() != j) {
            return Err(Error::DimensionMismatch {
                expected: j,
                got: bad.len(),
            });
        }
        Ok(Self { extremes })
    }

    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            vectors
                .into_iter()
                .map(CategoricalDist::new)
                .collect::<Result<_>>()?,
        )
    }

    pub fn extremes(&self) -> &[CategoricalDist] {
        &self.extremes
    }

    /// Number of extremes.
    pub fn len(&self) -> usize {
        self.extremes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extremes.is_empty()
    }

    /// Size of the outcome space.
    pub fn dim(&self) -> usize {
        self.extremes[0].len()
    }

    fn event_probs(&self, event: &EventMask) -> Result<impl Iterator<Item = f64> + '_> {
        if event.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: event.len(),
            });
        }
        let event = event.clone();
        Ok(self
            .extremes
            .iter()
            .map(move |e| event.probability(e).unwrap_or(0.0)))
    }

    /// `sup_P P(A)`, attained at an extreme.
    pub fn upper_prob(&self, event: &EventMask) -> Result<f64> {
        Ok(self
            .event_probs(event)?
            .fold(f64::NEG_INFINITY, f64::max)
            .min(1.0))
    }

    /// `inf_P P(A)`, attained at an extreme.
    pub fn lower_prob(&self, event: &EventMask) -> Result<f64> {
        Ok(self
            .event_probs(event)?
            .fold(f64::INFINITY, f64::min)
            .max(0.0))
    }

    /// `sum_k coeffs[k] * extreme_k`.
    pub fn convex_mixture(&self, coeffs: &[f64]) -> Result<CategoricalDist> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "mixture coefficients must be non-negative".into(),
            ));
        }
        let s: f64 = coeffs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture coefficients sum to {s}"
            )));
        }
        let mut out = vec![0.0; self.dim()];
        for (c, e) in coeffs.iter().zip(&self.extremes) {
            for (o, p) in out.iter_mut().zip(e.probs()) {
                *o += c * p;
            }
        }
        CategoricalDist::new(out)
    }

    /// Largest entropy among the extremes.
    pub fn upper_entropy(&self) -> f64 {
        self.extremes
            .iter()
            .map(entropy_categorical)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest entropy among the extremes.
    pub fn lower_entropy(&self) -> f64 {
        self.extremes
            .iter()
            .map(entropy_categorical)
            .fold(f64::INFINITY, f64::min)
    }

    /// Aleatoric part is the lower entropy, epistemic part the gap to the
    /// upper entropy.
    pub fn au_eu(&self) -> UncertaintySplit {
        let lower = self.lower_entropy();
        let upper = self.upper_entropy();
        UncertaintySplit {
            aleatoric: lower,
            epistemic: upper - lower,
        }
    }

    /// Whether a downstream region should be withheld because aleatoric
    /// uncertainty is too high. With `use_hull_bound` the threshold is
    /// raised by `log N`.
    pub fn au_check(&self, phi: f64, use_hull_bound: bool) -> Result<bool> {
        au_check(self.lower_entropy(), phi, self.len(), use_hull_bound)
    }

    /// Discrete Choquet integral of `f` against the chosen envelope.
    pub fn choquet(&self, f: &[f64], capacity: Capacity) -> Result<f64> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite integrand".into()));
        }
        let mut order: Vec<usize> = (0..f.len()).collect();
        order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));

        // f_(J) * nu(Omega) + sum_{i<J} (f_(i) - f_(i+1)) * nu(top-i set)
        let mut bits = vec![false; f.len()];
        let mut value = f[order[f.len() - 1]];
        for w in 0..f.len() - 1 {
            bits[order[w]] = true;
            let step = f[order[w]] - f[order[w + 1]];
            if step == 0.0 {
                continue;
            }
            let event = EventMask::new(bits.clone());
            let nu = match capacity {
                Capacity::Upper => self.upper_prob(&event)?,
                Capacity::Lower => self.lower_prob(&event)?,
            };
            value += step * nu;
        }
        Ok(value)
    }

    /// Per-outcome upper and lower probabilities.
    pub fn singleton_envelopes(&self) -> (Vec<f64>, Vec<f64>) {
        let j = self.dim();
        let mut upper = vec![0.0f64; j];
        let mut lower = vec![1.0f64; j];
        for e in &self.extremes {
            for (k, &p) in e.probs().iter().enumerate() {
                upper[k] = upper[k].max(p);
                lower[k] = lower[k].min(p);
            }
        }
        (upper, lower)
    }

    /// `H(P_upper) = -sum P_upper log P_lower` and
    /// `H(P_lower) = -sum P_lower log P_upper` over singletons. They bound the
    /// upper entropy from above and the lower entropy from below.
    pub fn entropy_bounds(&self) -> EntropyBounds {
        let (upper, lower) = self.singleton_envelopes();
        let cross = |weight: &[f64], inside_log: &[f64]| -> f64 {
            let mut h = 0.0;
            for (&w, &l) in weight.iter().zip(inside_log) {
                if w <= 0.0 {
                    continue;
                }
                if l <= 0.0 {
                    return f64::INFINITY;
                }
                h -= w * l.ln();
            }
            h
        };
        EntropyBounds {
            h_of_upper: cross(&upper, &lower),
            h_of_lower: cross(&lower, &upper),
        }
    }

    /// Flags extremes that are convex combinations of the others.
    ///
    /// Exact for at most three extremes (duplicate and between-two checks);
    /// for larger sets only duplicates are detected and the report is marked
    /// non-exhaustive.
    pub fn redundant_extremes(&self) -> RedundancyReport {
        let n = self.len();
        let mut redundant = Vec::new();
        for i in 0..n {
            let ei = self.extremes[i].probs();
            let duplicate = (0..i).any(|k| max_abs_diff(ei, self.extremes[k].probs()) <= REDUNDANCY_TOL);
            if duplicate {
                redundant.push(i);
                continue;
            }
            if n == 3 {
                let others: Vec<&[f64]> = (0..n)
                    .filter(|&k| k != i)
                    .map(|k| self.extremes[k].probs())
                    .collect();
                if on_segment(ei, others[0], others[1]) {
                    redundant.push(i);
                }
            }
        }
        RedundancyReport {
            redundant,
            exhaustive: n <= 3,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Whether `p` lies on the segment `[a, b]` within tolerance.
fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let dd: f64 = d.iter().map(|x| x * x).sum();
    if dd <= REDUNDANCY_TOL * REDUNDANCY_TOL {
        return max_abs_diff(p, a) <= REDUNDANCY_TOL;
    }
    let t = p
        .iter()
        .zip(a)
        .zip(&d)
        .map(|((p, a), d)| (p - a) * d)
        .sum::<f64>()
        / dd;
    if !(-REDUNDANCY_TOL..=1.0 + REDUNDANCY_TOL).contains(&t) {
        return false;
    }
    p.iter()
        .zip(a)
        .zip(&d)
        .all(|((p, a), d)| (a + t * d - p).abs() <= REDUNDANCY_TOL)
}

/// Abstention rule on a precomputed lower entropy: fires when
/// `lower_entropy > phi`, or `> phi + log n_extremes` with the hull bound.
pub fn au_check(lower_entropy: f64, phi: f64, n_extremes: usize, use_hull_bound: bool) -> Result<bool> {
    if !(phi >= 0.0) {
        return Err(Error::InvalidArgument(format!("phi must be >= 0, got {phi}")));
    }
    let threshold = if use_hull_bound {
        phi + (n_extremes.max(1) as f64).ln()
    } else {
        phi
    };
    Ok(lower_entropy > threshold)
}

/// `inf_{P in members} d(P, reference)`.
pub fn set_distance(
    members: &[CategoricalDist],
    reference: &CategoricalDist,
    metric: Divergence,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("empty set".into()));
    }
    members
        .iter()
        .map(|m| metric.between(m, reference))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngStream;

    fn cs(v: Vec<Vec<f64>>) -> FiniteCredalSet {
        FiniteCredalSet::from_vectors(v).unwrap()
    }

    #[test]
    fn upper_lower_examples() {
        let single = cs(vec![vec![0.6, 0.3, 0.1]]);
        let a = EventMask::from_indices(3, &[0]).unwrap();
        assert_eq!(single.upper_prob(&a).unwrap(), 0.6);

        let two = cs(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3]]);
        assert_eq!(two.upper_prob(&a).unwrap(), 0.6);
        assert_eq!(two.lower_prob(&a).unwrap(), 0.2);
        assert!((two.upper_prob(&EventMask::full(3)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(two.lower_prob(&EventMask::empty(3)).unwrap(), 0.0);
        assert!(two.upper_prob(&EventMask::full(2)).is_err());
    }

    #[test]
    fn mixture_examples() {
        let two = cs(vec![vec![0.6, 0.4], vec![0.2, 0.8]]);
        assert_eq!(two.convex_mixture(&[0.0, 1.0]).unwrap().probs(), &[0.2, 0.8]);
        let mid = two.convex_mixture(&[0.5, 0.5]).unwrap();
        assert!((mid.probs()[0] - 0.4).abs() < 1e-12);
        assert!((mid.probs()[1] - 0.6).abs() < 1e-12);
        assert!(two.convex_mixture(&[0.5, 0.6]).is_err());
        assert!(two.convex_mixture(&[1.5, -0.5]).is_err());
        assert!(two.convex_mixture(&[1.0]).is_err());
    }

    #[test]
    fn entropy_and_split_examples() {
        let p = CategoricalDist::new(vec![0.7, 0.2, 0.1]).unwrap();
        let single = FiniteCredalSet::new(vec![p.clone()]).unwrap();
        assert_eq!(single.upper_entropy(), p.entropy());
        assert_eq!(single.lower_entropy(), p.entropy());
        assert_eq!(single.au_eu().epistemic, 0.0);

        let extremal = cs(vec![vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert!((extremal.upper_entropy() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(extremal.lower_entropy(), 0.0);
        let s = extremal.au_eu();
        assert_eq!(s.aleatoric, 0.0);
        assert!((s.epistemic - std::f64::consts::LN_2).abs() < 1e-15);

        // Direct evaluation: H(0.9,0.1) and H(0.8,0.2) - H(0.9,0.1).
        let h = |a: f64| -(a * a.ln() + (1.0 - a) * (1.0 - a).ln());
        let near = cs(vec![vec![0.9, 0.1], vec![0.8, 0.2]]);
        let s = near.au_eu();
        assert!((s.aleatoric - h(0.9)).abs() < 1e-12);
        assert!((s.aleatoric - 0.325083).abs() < 1e-6);
        assert!((s.epistemic - (h(0.8) - h(0.9))).abs() < 1e-12);
        assert!((s.epistemic - 0.175319).abs() < 1e-6);
        assert_eq!(s.aleatoric + s.epistemic, near.upper_entropy());
    }

    #[test]
    fn au_check_examples() {
        let pm = cs(vec![vec![1.0, 0.0, 0.0]]);
        assert!(!pm.au_check(0.1, false).unwrap());
        let u = FiniteCredalSet::new(vec![CategoricalDist::uniform(10)]).unwrap();
        assert!(u.au_check(1.0, false).unwrap());
        // lower entropy log 10 against phi + log 4
        assert!(!au_check(10f64.ln(), 1.0, 4, true).unwrap());
        assert!(au_check(10f64.ln(), 1.0, 4, false).unwrap());
        assert!(au_check(0.5, -1.0, 1, false).is_err());
    }

    /// Brute force: sup / inf of ordinary expectations over sampled hull
    /// mixtures of a two-extreme set.
    fn hull_expectation_extrema(set: &FiniteCredalSet, f: &[f64], n: usize) -> (f64, f64) {
        let mut rng = RngStream::new(99, 0);
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for i in 0..=n {
            let t = if i == 0 {
                0.0
            } else if i == n {
                1.0
            } else {
                rng.uniform()
            };
            let m = set.convex_mixture(&[t, 1.0 - t]).unwrap();
            let e: f64 = m.probs().iter().zip(f).map(|(p, f)| p * f).sum();
            hi = hi.max(e);
            lo = lo.min(e);
        }
        (hi, lo)
    }

    #[test]
    fn choquet_examples() {
        let p = CategoricalDist::new(vec![0.2, 0.5, 0.3]).unwrap();
        let single = FiniteCredalSet::new(vec![p.clone()]).unwrap();
        let f = [2.0, -1.0, 4.0];
        let expect: f64 = p.probs().iter().zip(&f).map(|(p, f)| p * f).sum();
        for cap in [Capacity::Upper, Capacity::Lower] {
            assert!((single.choquet(&f, cap).unwrap() - expect).abs() < 1e-12);
        }

        let two = cs(vec![vec![0.6, 0.4], vec![0.1, 0.9]]);
        assert!((two.choquet(&[2.5, 2.5], Capacity::Upper).unwrap() - 2.5).abs() < 1e-15);
        assert!((two.choquet(&[2.5, 2.5], Capacity::Lower).unwrap() - 2.5).abs() < 1e-15);

        let vacuous = cs(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let f = [3.0, 1.0];
        let (hi, lo) = hull_expectation_extrema(&vacuous, &f, 10_000);
        assert_eq!(hi, 3.0);
        assert_eq!(vacuous.choquet(&f, Capacity::Upper).unwrap(), hi);
        assert_eq!(vacuous.choquet(&f, Capacity::Lower).unwrap(), lo);
    }

    #[test]
    fn choquet_matches_hull_brute_force_on_two_outcomes() {
        let mut rng = RngStream::new(17, 0);
        for _ in 0..200 {
            let a = rng.uniform();
            let b = rng.uniform();
            let set = cs(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]);
            let f = [rng.uniform_range(-5.0, 5.0), rng.uniform_range(-5.0, 5.0)];
            let (hi, lo) = hull_expectation_extrema(&set, &f, 2_000);
            assert!((set.choquet(&f, Capacity::Upper).unwrap() - hi).abs() < 1e-9);
            assert!((set.choquet(&f, Capacity::Lower).unwrap() - lo).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_bound_examples() {
        let p = CategoricalDist::new(vec![0.3, 0.7]).unwrap();
        let single = FiniteCredalSet::new(vec![p.clone()]).unwrap();
        let b = single.entropy_bounds();
        assert!((b.h_of_upper - p.entropy()).abs() < 1e-15);
        assert!((b.h_of_lower - p.entropy()).abs() < 1e-15);

        let vacuous = cs(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = vacuous.entropy_bounds();
        assert_eq!(b.h_of_upper, f64::INFINITY);
        assert!(!b.h_of_lower.is_nan());

        let sym = cs(vec![vec![0.6, 0.4], vec![0.4, 0.6]]);
        let b = sym.entropy_bounds();
        let h_up = -2.0 * 0.6 * 0.4f64.ln();
        let h_lo = -2.0 * 0.4 * 0.6f64.ln();
        assert!((b.h_of_upper - h_up).abs() < 1e-12);
        assert!((b.h_of_upper - 1.099549).abs() < 1e-6);
        assert!((b.h_of_lower - h_lo).abs() < 1e-12);
        assert!((b.h_of_lower - 0.408660).abs() < 1e-6);
        assert!((sym.upper_entropy() - 0.673012).abs() < 1e-6);
        assert!(b.h_of_upper >= sym.upper_entropy());
        assert!(b.h_of_lower <= sym.lower_entropy());
    }

    #[test]
    fn set_distance_examples() {
        let p = CategoricalDist::new(vec![0.3, 0.7]).unwrap();
        let q = CategoricalDist::new(vec![0.9, 0.1]).unwrap();
        let set = vec![q.clone(), p.clone()];
        assert_eq!(set_distance(&set, &p, Divergence::TotalVariation).unwrap(), 0.0);
        assert_eq!(set_distance(&set, &p, Divergence::Kl).unwrap(), 0.0);

        let e1 = vec![CategoricalDist::point_mass(2, 0)];
        let e2 = CategoricalDist::point_mass(2, 1);
        assert_eq!(set_distance(&e1, &e2, Divergence::TotalVariation).unwrap(), 1.0);
        assert_eq!(set_distance(&e1, &e2, Divergence::Kl).unwrap(), f64::INFINITY);

        let set = vec![
            CategoricalDist::point_mass(2, 0),
            CategoricalDist::new(vec![0.5, 0.5]).unwrap(),
        ];
        let r = CategoricalDist::new(vec![0.4, 0.6]).unwrap();
        assert!((set_distance(&set, &r, Divergence::TotalVariation).unwrap() - 0.1).abs() < 1e-12);
        assert!(set_distance(&[], &r, Divergence::Kl).is_err());
    }

    #[test]
    fn redundancy_diagnostic() {
        let clean = cs(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(clean.redundant_extremes().redundant.is_empty());

        let with_mid = cs(vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        let r = with_mid.redundant_extremes();
        assert_eq!(r.redundant, vec![1]);
        assert!(r.exhaustive);

        let triangle = cs(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        assert!(triangle.redundant_extremes().redundant.is_empty());

        let dup = cs(vec![
            vec![0.2, 0.8],
            vec![0.3, 0.7],
            vec![0.2, 0.8],
            vec![0.9, 0.1],
        ]);
        let r = dup.redundant_extremes();
        assert_eq!(r.redundant, vec![2]);
        assert!(!r.exhaustive);
    }

    #[test]
    fn construction_errors() {
        assert!(FiniteCredalSet::new(vec![]).is_err());
        assert!(FiniteCredalSet::from_vectors(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(EventMask::from_indices(2, &[2]).is_err());
    }
}
