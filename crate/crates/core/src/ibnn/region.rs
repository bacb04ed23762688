//! One-dimensional highest density regions and their unions.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};
use crate::prob::EmpiricalSample1D;

/// Minimum number of samples accepted by the sample-based HDR methods.
pub const MIN_HDR_SAMPLES: usize = 20;
/// Grid resolution of the kernel-density HDR.
pub const KDE_GRID_POINTS: usize = 512;

/// `z` with `Phi(z) = p`.
pub fn normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// HDR computation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HdrMethod {
    /// `mean +/- z_{1-alpha/2} sd` from the first two moments.
    Gaussian,
    /// Narrowest window holding `ceil((1-alpha) n)` sorted samples.
    EmpiricalShortest,
    /// Level set of a Gaussian kernel density on a fixed grid; may be a union
    /// of intervals.
    GridDensity,
}

#[derive(Deserialize)]
struct RawRegion {
    level: f64,
    intervals: Vec<Interval>,
}

/// A non-empty union of disjoint closed intervals at level `alpha`, kept
/// sorted and merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region1D {
    level: f64,
    intervals: Vec<Interval>,
}

impl TryFrom<RawRegion> for Region1D {
    type Error = Error;

    fn try_from(raw: RawRegion) -> Result<Self> {
        Region1D::new(raw.level, raw.intervals)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

impl Region1D {
    pub fn new(level: f64, mut intervals: Vec<Interval>) -> Result<Self> {
        check_alpha(level)?;
        if intervals.is_empty() {
            return Err(Error::InvalidArgument("a region needs at least one interval".into()));
        }
        if let Some(bad) = intervals
            .iter()
            .find(|i| !(i.lo.is_finite() && i.hi.is_finite() && i.lo <= i.hi))
        {
            return Err(Error::InvalidArgument(format!(
                "malformed interval [{}, {}]",
                bad.lo, bad.hi
            )));
        }
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(Self {
            level,
            intervals: merged,
        })
    }

    pub fn interval(level: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(level, vec![Interval::new(lo, hi)])
    }

    /// Union of regions sharing one level.
    pub fn union<'a>(regions: impl IntoIterator<Item = &'a Region1D>) -> Result<Self> {
        let mut level = None;
        let mut all = Vec::new();
        for r in regions {
            match level {
                None => level = Some(r.level),
                Some(l) if l != r.level => {
                    return Err(Error::InvalidArgument(format!(
                        "cannot union regions at levels {l} and {}",
                        r.level
                    )))
                }
                _ => {}
            }
            all.extend_from_slice(&r.intervals);
        }
        let level = level.ok_or_else(|| Error::InvalidArgument("union of no regions".into()))?;
        Self::new(level, all)
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(y))
    }

    /// Lebesgue measure of the region.
    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(Interval::width).sum()
    }

    /// Smallest single interval containing the region.
    pub fn hull(&self) -> Interval {
        Interval::new(self.intervals[0].lo, self.intervals.last().unwrap().hi)
    }

    /// Whether every point of `other` lies in `self`.
    pub fn covers(&self, other: &Region1D) -> bool {
        other
            .intervals
            .iter()
            .all(|o| self.intervals.iter().any(|s| s.lo <= o.lo && o.hi <= s.hi))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `mean +/- z_{1 - alpha/2} sqrt(var)`.
pub fn gaussian_hdr(mean: f64, var: f64, alpha: f64) -> Result<Region1D> {
    check_alpha(alpha)?;
    if !(mean.is_finite() && var.is_finite() && var >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad Gaussian moments ({mean}, {var})"
        )));
    }
    let half = normal_quantile(1.0 - alpha / 2.0) * var.sqrt();
    Region1D::interval(alpha, mean - half, mean + half)
}

/// Number of samples a `1 - alpha` region must hold.
fn required_count(n: usize, alpha: f64) -> usize {
    // Guard against (1 - alpha) * n landing a hair above an integer.
    let m = ((1.0 - alpha) * n as f64 - 1e-9).ceil() as usize;
    m.clamp(1, n)
}

/// Narrowest window of consecutive sorted samples holding at least
/// `ceil((1 - alpha) n)` of them; ties go to the smallest lower end.
pub fn empirical_shortest_hdr(samples: &EmpiricalSample1D, alpha: f64) -> Result<Region1D> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n < MIN_HDR_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_HDR_SAMPLES,
            got: n,
        });
    }
    let v = samples.values();
    let m = required_count(n, alpha);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=n - m {
        let w = v[i + m - 1] - v[i];
        if w < best_width {
            best_width = w;
            best = i;
        }
    }
    Region1D::interval(alpha, v[best], v[best + m - 1])
}

/// Silverman's rule-of-thumb bandwidth.
fn silverman_bandwidth(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Density level set of a Gaussian KDE evaluated on
/// [`KDE_GRID_POINTS`] points spanning the samples plus three bandwidths.
pub fn grid_density_hdr(samples: &EmpiricalSample1D, alpha: f64) -> Result<Region1D> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n < MIN_HDR_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_HDR_SAMPLES,
            got: n,
        });
    }
    let v = samples.values();
    let h = silverman_bandwidth(v);
    if !(h > 0.0) {
        // All samples coincide.
        return Region1D::interval(alpha, v[0], v[n - 1]);
    }
    let lo = v[0] - 3.0 * h;
    let hi = v[n - 1] + 3.0 * h;
    let dx = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + i as f64 * dx).collect();
    let density: Vec<f64> = grid
        .iter()
        .map(|g| {
            v.iter()
                .map(|x| {
                    let u = (g - x) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = density.iter().sum();

    let mut order: Vec<usize> = (0..KDE_GRID_POINTS).collect();
    order.sort_by(|&a, &b| density[b].total_cmp(&density[a]).then(a.cmp(&b)));
    let target = 1.0 - alpha;
    let mut acc = 0.0;
    let mut threshold = 0.0;
    for &i in &order {
        acc += density[i] / total;
        threshold = density[i];
        if acc >= target {
            break;
        }
    }

    // Contiguous runs of selected grid cells become intervals.
    let mut intervals = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=KDE_GRID_POINTS {
        let selected = i < KDE_GRID_POINTS && density[i] >= threshold;
        match (selected, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                intervals.push(Interval::new(grid[s] - dx / 2.0, grid[i - 1] + dx / 2.0));
                run_start = None;
            }
            _ => {}
        }
    }
    Region1D::new(alpha, intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::RngStream;

    /// Inverse CDF by bisection on a Simpson-integrated standard normal
    /// density.
    fn quantile_oracle(p: f64) -> f64 {
        let cdf = |z: f64| {
            let n = 4000;
            let a = -12.0;
            let h = (z - a) / n as f64;
            let f = |x: f64| (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut s = f(a) + f(z);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            s * h / 3.0
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gaussian_hdr_matches_quantile_oracle() {
        let z = quantile_oracle(0.975);
        assert!((z - 1.959964).abs() < 1e-5);
        let r = gaussian_hdr(0.0, 1.0, 0.05).unwrap();
        let iv = r.intervals()[0];
        assert!((iv.lo + 1.960).abs() < 1e-3 && (iv.hi - 1.960).abs() < 1e-3);
        assert!((iv.hi - z).abs() < 1e-8);
        for p in [0.6, 0.9, 0.995, 0.9995] {
            assert!((normal_quantile(p) - quantile_oracle(p)).abs() < 1e-7);
        }
    }

    #[test]
    fn high_alpha_shrinks_to_mode() {
        let r = gaussian_hdr(2.0, 4.0, 0.999).unwrap();
        assert!(r.total_length() < 0.01);
        assert!(r.contains(2.0));
        let mut rng = RngStream::new(4, 0);
        let s = EmpiricalSample1D::new((0..2000).map(|_| rng.standard_normal()).collect()).unwrap();
        // The narrowest window of two samples may sit anywhere, but its width
        // vanishes; the density-based region collapses onto the mode.
        let r = empirical_shortest_hdr(&s, 0.999).unwrap();
        assert!(r.total_length() < 0.05);
        let r = grid_density_hdr(&s, 0.999).unwrap();
        assert!(r.total_length() < 0.1);
        assert!(r.hull().lo.abs() < 0.3);
    }

    #[test]
    fn empirical_shortest_integer_grid() {
        let s = EmpiricalSample1D::new((1..=100).map(f64::from).collect()).unwrap();
        // Brute force: every window of 90 consecutive values has width 89.
        let widths: Vec<f64> = (0..=10).map(|i| s.values()[i + 89] - s.values()[i]).collect();
        assert!(widths.iter().all(|w| *w == 89.0));
        let r = empirical_shortest_hdr(&s, 0.1).unwrap();
        assert_eq!(r.intervals(), &[Interval::new(1.0, 90.0)]);
        let covered = s.values().iter().filter(|v| r.contains(**v)).count();
        assert_eq!(covered, 90);
    }

    #[test]
    fn empirical_shortest_windows_need_not_nest() {
        // A tight cluster of three wins at 50%, a wider cluster of four at 75%.
        let mut v = vec![0.0, 0.01, 0.02];
        v.extend([10.0, 10.1, 10.2, 10.3]);
        v.extend((0..13).map(|i| 100.0 + 50.0 * i as f64));
        let s = EmpiricalSample1D::new(v).unwrap();
        let wide = empirical_shortest_hdr(&s, 0.85).unwrap();
        let narrow = empirical_shortest_hdr(&s, 0.8).unwrap();
        assert_eq!(wide.intervals(), &[Interval::new(0.0, 0.02)]);
        assert_eq!(narrow.intervals(), &[Interval::new(10.0, 10.3)]);
        assert!(!narrow.covers(&wide));
    }

    #[test]
    fn too_few_samples() {
        let s = EmpiricalSample1D::new(vec![0.0; 5]).unwrap();
        assert!(matches!(
            empirical_shortest_hdr(&s, 0.1),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(grid_density_hdr(&s, 0.1).is_err());
    }

    #[test]
    fn grid_density_finds_two_modes_with_coverage() {
        let mut rng = RngStream::new(21, 0);
        let draw = |rng: &mut RngStream| {
            if rng.uniform() < 0.5 {
                -4.0 + 0.5 * rng.standard_normal()
            } else {
                4.0 + 0.5 * rng.standard_normal()
            }
        };
        let s = EmpiricalSample1D::new((0..4000).map(|_| draw(&mut rng)).collect()).unwrap();
        let r = grid_density_hdr(&s, 0.1).unwrap();
        assert_eq!(r.intervals().len(), 2);
        assert!(!r.contains(0.0));
        let fresh: Vec<f64> = (0..20_000).map(|_| draw(&mut rng)).collect();
        let cov = fresh.iter().filter(|y| r.contains(**y)).count() as f64 / fresh.len() as f64;
        assert!(cov >= 0.9 - 0.01, "coverage {cov}");
    }

    #[test]
    fn gaussian_hdr_empirical_coverage() {
        let mut rng = RngStream::new(8, 0);
        let r = gaussian_hdr(1.0, 2.0, 0.1).unwrap();
        let n = 50_000;
        let hits = (0..n)
            .filter(|_| r.contains(1.0 + 2f64.sqrt() * rng.standard_normal()))
            .count();
        assert!(hits as f64 / n as f64 >= 0.9 - 0.005);
    }

    #[test]
    fn region_merge_and_json() {
        let r = Region1D::new(0.1, vec![Interval::new(0.5, 2.0), Interval::new(-1.0, 1.0)]).unwrap();
        assert_eq!(r.intervals(), &[Interval::new(-1.0, 2.0)]);
        let two = Region1D::new(0.1, vec![Interval::new(4.0, 6.0), Interval::new(-1.0, 1.0)]).unwrap();
        assert_eq!(two.intervals().len(), 2);
        assert_eq!(two.total_length(), 4.0);
        let json = two.to_json().unwrap();
        assert_eq!(json, r#"{"level":0.1,"intervals":[[-1.0,1.0],[4.0,6.0]]}"#);
        assert_eq!(Region1D::from_json(&json).unwrap(), two);
        assert!(Region1D::from_json(r#"{"level":0.1,"intervals":[[2.0,1.0]]}"#).is_err());
        assert!(Region1D::from_json(r#"{"level":1.5,"intervals":[[0.0,1.0]]}"#).is_err());
        assert!(Region1D::new(0.1, vec![]).is_err());
    }

    #[test]
    fn union_requires_common_level() {
        let a = Region1D::interval(0.1, 0.0, 1.0).unwrap();
        let b = Region1D::interval(0.2, 0.0, 1.0).unwrap();
        assert!(Region1D::union([&a, &b]).is_err());
        assert!(Region1D::union(std::iter::empty()).is_err());
    }
}
