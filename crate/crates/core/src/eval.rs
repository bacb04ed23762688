//! Metrics: region coverage on trajectories, time outside a safe band,
//! relative improvement, and rank-based trend statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibnn::RegionBox;

/// Planar pose with heading (radians) and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub a: f64,
    pub b: f64,
    pub heading: f64,
    pub speed: f64,
}

impl Pose {
    pub fn position(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.heading.is_finite() && self.speed.is_finite()
    }
}

/// An observed history of `l + 1` poses and the `h` poses that followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInstance {
    observed: Vec<Pose>,
    future: Vec<Pose>,
}

impl TrajectoryInstance {
    pub fn new(observed: Vec<Pose>, future: Vec<Pose>) -> Result<Self> {
        if observed.is_empty() || future.is_empty() {
            return Err(Error::InvalidArgument("observed and future must be non-empty".into()));
        }
        if !observed.iter().chain(&future).all(Pose::is_finite) {
            return Err(Error::InvalidArgument("non-finite pose".into()));
        }
        Ok(Self { observed, future })
    }

    pub fn observed(&self) -> &[Pose] {
        &self.observed
    }

    pub fn future(&self) -> &[Pose] {
        &self.future
    }

    pub fn current(&self) -> &Pose {
        self.observed.last().unwrap()
    }
}

fn check_shapes(regions: &[Vec<RegionBox>], truths: &[TrajectoryInstance]) -> Result<()> {
    if regions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: regions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidArgument("no instances".into()));
    }
    for (boxes, t) in regions.iter().zip(truths) {
        if boxes.len() != t.future.len() {
            return Err(Error::DimensionMismatch {
                expected: t.future.len(),
                got: boxes.len(),
            });
        }
        if let Some(b) = boxes.iter().find(|b| b.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, got: b.dim() });
        }
    }
    Ok(())
}

fn hits<'a>(boxes: &'a [RegionBox], truth: &'a TrajectoryInstance) -> impl Iterator<Item = bool> + 'a {
    boxes.iter().zip(&truth.future).map(|(b, p)| b.contains(&p.position()))
}

/// Fraction of (instance, step) pairs whose true position lies in its box.
pub fn one_step_coverage(regions: &[Vec<RegionBox>], truths: &[TrajectoryInstance]) -> Result<f64> {
    check_shapes(regions, truths)?;
    let (mut inside, mut total) = (0usize, 0usize);
    for (boxes, t) in regions.iter().zip(truths) {
        for hit in hits(boxes, t) {
            inside += hit as usize;
            total += 1;
        }
    }
    Ok(inside as f64 / total as f64)
}

/// Fraction of instances whose every future position lies in its box.
pub fn multi_step_coverage(regions: &[Vec<RegionBox>], truths: &[TrajectoryInstance]) -> Result<f64> {
    check_shapes(regions, truths)?;
    let covered = regions
        .iter()
        .zip(truths)
        .filter(|(boxes, t)| hits(boxes, t).all(|h| h))
        .count();
    Ok(covered as f64 / truths.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub one_step: f64,
    pub multi_step: f64,
    /// Mean over all boxes of the mean per-coordinate region length.
    pub mean_region_width: f64,
    pub alpha: f64,
}

pub fn coverage_report(regions: &[Vec<RegionBox>], truths: &[TrajectoryInstance], alpha: f64) -> Result<CoverageReport> {
    let one_step = one_step_coverage(regions, truths)?;
    let multi_step = multi_step_coverage(regions, truths)?;
    let widths: Vec<f64> = regions.iter().flatten().map(RegionBox::mean_width).collect();
    Ok(CoverageReport {
        one_step,
        multi_step,
        mean_region_width: widths.iter().sum::<f64>() / widths.len() as f64,
        alpha,
    })
}

/// Lower edge of the safe glucose band (mg/dl).
pub const SAFE_LO: f64 = 70.0;
/// Upper edge of the safe glucose band (mg/dl).
pub const SAFE_HI: f64 = 300.0;

/// Fraction of samples strictly below `lo` or strictly above `hi`.
pub fn t_unsafe(trace: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let unsafe_steps = trace.iter().filter(|g| **g < lo || **g > hi).count();
    Ok(unsafe_steps as f64 / trace.len() as f64)
}

/// Relative reduction in unsafe time; undefined when the reference
/// controller never left the safe band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum PerfDiff {
    Defined(f64),
    Undefined,
}

impl PerfDiff {
    pub fn value(&self) -> Option<f64> {
        match self {
            PerfDiff::Defined(v) => Some(*v),
            PerfDiff::Undefined => None,
        }
    }
}

/// `(t_ebnn - t_ibnn) / t_ebnn`; positive means the imprecise model spent
/// less time unsafe.
pub fn perf_diff(t_ebnn: f64, t_ibnn: f64) -> PerfDiff {
    if t_ebnn > 0.0 {
        PerfDiff::Defined((t_ebnn - t_ibnn) / t_ebnn)
    } else {
        PerfDiff::Undefined
    }
}

/// 1-based ranks with ties given their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman correlation (midranks) between two equal-length sequences;
/// zero when either is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(pearson(&midranks(x), &midranks(y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub is_nondecreasing: bool,
    pub spearman: f64,
}

/// Monotonicity (with 1e-9 slack) and rank correlation of `values` against
/// their position.
pub fn monotone_trend(values: &[f64]) -> Result<Trend> {
    if values.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite trend value".into()));
    }
    let is_nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    let index: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    Ok(Trend {
        is_nondecreasing,
        spearman: spearman(&index, values)?,
    })
}

/// Which predictor produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ibnn,
    Ebnn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ibnn => "ibnn",
            ModelKind::Ebnn => "ebnn",
        })
    }
}

/// One line of a results CSV. Fields that do not apply to a task are left
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub alpha: Option<f64>,
    pub model: ModelKind,
    pub one_step: Option<f64>,
    pub multi_step: Option<f64>,
    pub mean_width: Option<f64>,
    pub au: Option<f64>,
    pub eu: Option<f64>,
    pub seed: u64,
}
