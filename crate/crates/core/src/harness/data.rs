//! Synthetic datasets: a heteroscedastic 1-D regression curve, two
//! interleaved half-moons with adjustable input noise, and unicycle
//! trajectories of low or high curvature.

use serde::{Deserialize, Serialize};

use crate::bnn::Dataset;
use crate::error::{Error, Result};
use crate::eval::{Pose, TrajectoryInstance};
use crate::prob::RngStream;

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::TooFewSamples { needed: min, got: n })
    } else {
        Ok(())
    }
}

/// Noise-free regression curve `sin(3x) + x/2`.
pub fn regression_mean(x: f64) -> f64 {
    (3.0 * x).sin() + 0.5 * x
}

/// Noise standard deviation of the regression task at `x`.
pub fn regression_noise_sd(x: f64) -> f64 {
    0.1 + 0.15 * x.abs()
}

/// `n` points with `x ~ U[-2, 2]` and `y = sin(3x) + x/2 + eps`,
/// `eps ~ N(0, sd(x)^2)`.
pub fn gen_regression(n: usize, seed: u64) -> Result<Dataset> {
    gen_regression_with_noise(n, seed, true)
}

/// As [`gen_regression`], optionally without observation noise.
pub fn gen_regression_with_noise(n: usize, seed: u64, noisy: bool) -> Result<Dataset> {
    check_n(n, 10)?;
    let mut rng = RngStream::new(seed, 0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.uniform_range(-2.0, 2.0);
        let eps = if noisy { regression_noise_sd(x) * rng.standard_normal() } else { 0.0 };
        xs.push(vec![x]);
        ys.push(vec![regression_mean(x) + eps]);
    }
    Dataset::regression(xs, ys)
}

/// Highest corruption severity.
pub const MAX_SEVERITY: u8 = 5;
/// Input-noise standard deviation added per severity level.
pub const SEVERITY_NOISE_SD: f64 = 0.05;

/// Two half-moons, labels 0 and 1 in alternating rows; severity `s` adds
/// isotropic Gaussian input noise with standard deviation `0.05 s`.
pub fn gen_classification(n: usize, seed: u64, severity: u8) -> Result<Dataset> {
    check_n(n, 10)?;
    if severity > MAX_SEVERITY {
        return Err(Error::InvalidArgument(format!(
            "severity {severity} outside 0..={MAX_SEVERITY}"
        )));
    }
    let sd = SEVERITY_NOISE_SD * severity as f64;
    let mut rng = RngStream::new(seed, 0);
    let mut xs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let t = rng.uniform_range(0.0, std::f64::consts::PI);
        let (a, b) = if label == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        // Noise is drawn at every severity, so for a fixed seed all
        // severities share the clean points and the noise direction; only
        // its scale changes.
        let (na, nb) = (rng.standard_normal(), rng.standard_normal());
        xs.push(vec![a + sd * na, b + sd * nb]);
        labels.push(label);
    }
    Dataset::classification(xs, labels)
}

/// Which curvature regime trajectories are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySplit {
    /// Gentle paths, like the training data.
    InDist,
    /// Sharp turns never seen in training.
    Ood,
}

impl std::fmt::Display for TrajectorySplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrajectorySplit::InDist => "in_dist",
            TrajectorySplit::Ood => "ood",
        })
    }
}

/// Shape of generated trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    /// Observed history length `l`; instances hold `l + 1` observed poses.
    pub history: usize,
    pub horizon: usize,
    pub dt: f64,
    pub speed_range: (f64, f64),
    /// `|curvature|` range (1/m) of the in-distribution split.
    pub in_dist_curvature: (f64, f64),
    /// `|curvature|` range of the out-of-distribution split.
    pub ood_curvature: (f64, f64),
    /// Per-step heading perturbation (rad).
    pub heading_noise_sd: f64,
    /// Per-step speed perturbation (m/s).
    pub speed_noise_sd: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            history: 10,
            horizon: 5,
            dt: 0.1,
            speed_range: (1.0, 2.0),
            in_dist_curvature: (0.0, 0.3),
            ood_curvature: (0.6, 1.2),
            heading_noise_sd: 0.03,
            speed_noise_sd: 0.05,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [self.speed_range, self.in_dist_curvature, self.ood_curvature];
        if self.history == 0 || self.horizon == 0 || !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("history, horizon and dt must be positive".into()));
        }
        if ranges.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi)) {
            return Err(Error::InvalidArgument("ranges must satisfy 0 <= lo <= hi".into()));
        }
        if !(self.heading_noise_sd >= 0.0 && self.speed_noise_sd >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be >= 0".into()));
        }
        Ok(())
    }
}

/// Unicycle rollout of `steps` poses after `start` with constant nominal
/// speed and curvature, perturbed by `noise` when given.
pub fn rollout(
    start: Pose,
    curvature: f64,
    steps: usize,
    dt: f64,
    mut noise: Option<(&mut RngStream, f64, f64)>,
) -> Vec<Pose> {
    let nominal_speed = start.speed;
    let mut p = start;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (dh, dv) = match noise.as_mut() {
            Some((rng, h_sd, v_sd)) => (*h_sd * rng.standard_normal(), *v_sd * rng.standard_normal()),
            None => (0.0, 0.0),
        };
        let speed = (nominal_speed + dv).max(0.0);
        let heading = p.heading + speed * curvature * dt + dh;
        p = Pose {
            a: p.a + speed * dt * heading.cos(),
            b: p.b + speed * dt * heading.sin(),
            heading,
            speed,
        };
        out.push(p);
    }
    out
}

/// `n` trajectory instances from `split`'s curvature regime.
pub fn gen_trajectories(n: usize, seed: u64, split: TrajectorySplit, spec: &TrajectorySpec) -> Result<Vec<TrajectoryInstance>> {
    check_n(n, 1)?;
    spec.validate()?;
    let (k_lo, k_hi) = match split {
        TrajectorySplit::InDist => spec.in_dist_curvature,
        TrajectorySplit::Ood => spec.ood_curvature,
    };
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|_| {
            let start = Pose {
                a: rng.uniform_range(-10.0, 10.0),
                b: rng.uniform_range(-10.0, 10.0),
                heading: rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI),
                speed: rng.uniform_range(spec.speed_range.0, spec.speed_range.1),
            };
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            let curvature = sign * rng.uniform_range(k_lo, k_hi);
            let mut poses = vec![start];
            poses.extend(rollout(
                start,
                curvature,
                spec.history + spec.horizon,
                spec.dt,
                Some((&mut rng, spec.heading_noise_sd, spec.speed_noise_sd)),
            ));
            let future = poses.split_off(spec.history + 1);
            TrajectoryInstance::new(poses, future)
        })
        .collect()
}

/// Mean absolute curvature along the observed and future path, from heading
/// changes per distance travelled.
pub fn path_curvature(inst: &TrajectoryInstance) -> f64 {
    let poses: Vec<&Pose> = inst.observed().iter().chain(inst.future()).collect();
    let mut total = 0.0;
    let mut count = 0;
    for w in poses.windows(2) {
        let ds = ((w[1].a - w[0].a).powi(2) + (w[1].b - w[0].b).powi(2)).sqrt();
        if ds > 0.0 {
            total += (w[1].heading - w[0].heading).abs() / ds;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// The instance expressed in the frame of its current pose: origin at the
/// current position, first axis along the current heading.
pub fn to_local_frame(inst: &TrajectoryInstance) -> TrajectoryInstance {
    let c = *inst.current();
    let (s, co) = c.heading.sin_cos();
    let map = |p: &Pose| {
        let (da, db) = (p.a - c.a, p.b - c.b);
        Pose {
            a: co * da + s * db,
            b: -s * da + co * db,
            heading: p.heading - c.heading,
            speed: p.speed,
        }
    };
    TrajectoryInstance::new(inst.observed().iter().map(map).collect(), inst.future().iter().map(map).collect())
        .expect("rigid motion keeps poses finite")
}

/// Network input of a local-frame instance: past positions (excluding the
/// current one, which is the origin).
pub fn trajectory_features(local: &TrajectoryInstance) -> Vec<f64> {
    let obs = local.observed();
    obs[..obs.len() - 1].iter().flat_map(|p| [p.a, p.b]).collect()
}

/// Network target of a local-frame instance: future positions.
pub fn trajectory_targets(local: &TrajectoryInstance) -> Vec<f64> {
    local.future().iter().flat_map(|p| [p.a, p.b]).collect()
}

/// Regression dataset of local-frame histories and futures.
pub fn trajectory_dataset(instances: &[TrajectoryInstance]) -> Result<Dataset> {
    let local: Vec<TrajectoryInstance> = instances.iter().map(to_local_frame).collect();
    Dataset::regression(
        local.iter().map(trajectory_features).collect(),
        local.iter().map(trajectory_targets).collect(),
    )
}
