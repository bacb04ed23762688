use ibnn::bnn::{train_vi, Activation, GaussianPriorSpec, Head, MlpArchitecture, Targets, TrainConfig};
use ibnn::harness::data::{
    gen_classification, gen_regression, gen_trajectories, regression_mean, regression_noise_sd, TrajectorySpec,
    TrajectorySplit, MAX_SEVERITY,
};

fn labels(t: &Targets) -> &[usize] {
    match t {
        Targets::Labels(l) => l,
        Targets::Real(_) => panic!("expected labels"),
    }
}

fn values(t: &Targets) -> &[Vec<f64>] {
    match t {
        Targets::Real(v) => v,
        Targets::Labels(_) => panic!("expected values"),
    }
}

#[test]
fn regression_residual_variance_matches_noise_model() {
    let data = gen_regression(100_000, 12).unwrap();
    let ys = values(data.targets());
    // Residual variance in narrow x bins against the noise variance at the
    // bin centre.
    for centre in [-1.8, -1.0, 0.0, 0.7, 1.5] {
        let res: Vec<f64> = data
            .inputs()
            .iter()
            .zip(ys)
            .filter(|(x, _)| (x[0] - centre).abs() < 0.02)
            .map(|(x, y)| y[0] - regression_mean(x[0]))
            .collect();
        let n = res.len() as f64;
        assert!(n > 500.0, "{n} points near {centre}");
        let mean = res.iter().sum::<f64>() / n;
        let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = regression_noise_sd(centre).powi(2);
        // Five standard errors of a Gaussian sample variance, plus the
        // variance spread across the bin.
        let tol = 5.0 * expected * (2.0 / (n - 1.0)).sqrt() + 0.01 * expected;
        assert!((var - expected).abs() < tol, "x={centre}: var {var} vs {expected} (n={n})");
        assert!(mean.abs() < 5.0 * (expected / n).sqrt());
    }
}

#[test]
fn clean_half_moons_are_learnable() {
    let data = gen_classification(600, 3, 0).unwrap();
    let arch = MlpArchitecture::new(vec![2, 16, 2], Activation::Tanh, Head::CategoricalSoftmax).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        learning_rate: 0.02,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let post = train_vi(&arch, &GaussianPriorSpec::zero_mean(1.0).unwrap(), &data, &cfg).unwrap();
    let correct = data
        .inputs()
        .iter()
        .zip(labels(data.targets()))
        .filter(|(x, y)| {
            let logits = arch.forward(post.mean(), x);
            let pred = if logits[1] > logits[0] { 1 } else { 0 };
            pred == **y
        })
        .count();
    let acc = correct as f64 / data.len() as f64;
    assert!(acc >= 0.95, "train accuracy {acc}");
}

/// Hold-out error of a k-nearest-neighbour vote, a consistent stand-in for
/// the Bayes error.
fn knn_error(train: &ibnn::bnn::Dataset, test: &ibnn::bnn::Dataset, k: usize) -> f64 {
    let train_y = labels(train.targets());
    let mut wrong = 0;
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    for (x, y) in test.inputs().iter().zip(labels(test.targets())) {
        dist.clear();
        dist.extend(
            train
                .inputs()
                .iter()
                .zip(train_y)
                .map(|(t, l)| ((t[0] - x[0]).powi(2) + (t[1] - x[1]).powi(2), *l)),
        );
        dist.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0));
        let ones = dist[..k].iter().filter(|(_, l)| *l == 1).count();
        let pred = usize::from(2 * ones > k);
        wrong += usize::from(pred != *y);
    }
    wrong as f64 / test.len() as f64
}

#[test]
fn severity_increases_knn_error() {
    let errors: Vec<f64> = (0..=MAX_SEVERITY)
        .map(|s| {
            let train = gen_classification(5000, 100, s).unwrap();
            let test = gen_classification(5000, 200, s).unwrap();
            knn_error(&train, &test, 15)
        })
        .collect();
    // Low severities are all near zero error; allow sampling noise there and
    // require clear growth overall.
    for w in errors.windows(2) {
        assert!(w[1] >= w[0] - 0.005, "{errors:?}");
    }
    assert!(errors[MAX_SEVERITY as usize] > errors[1] + 0.02, "{errors:?}");
    assert!(errors[MAX_SEVERITY as usize] > errors[3], "{errors:?}");
}

/// Mean absolute curvature along an instance: heading change per unit of
/// path length.
fn curvature(inst: &ibnn::eval::TrajectoryInstance) -> f64 {
    let poses: Vec<_> = inst.observed().iter().chain(inst.future()).collect();
    let turn = (poses[poses.len() - 1].heading - poses[0].heading).abs();
    let length: f64 = poses
        .windows(2)
        .map(|w| ((w[1].a - w[0].a).powi(2) + (w[1].b - w[0].b).powi(2)).sqrt())
        .sum();
    turn / length
}

#[test]
fn ood_curvature_dominates_in_dist() {
    let spec = TrajectorySpec::default();
    let a: Vec<f64> = gen_trajectories(1000, 5, TrajectorySplit::InDist, &spec)
        .unwrap()
        .iter()
        .map(curvature)
        .collect();
    let b: Vec<f64> = gen_trajectories(1000, 6, TrajectorySplit::Ood, &spec)
        .unwrap()
        .iter()
        .map(curvature)
        .collect();
    // Mann-Whitney U of b over a, with the normal approximation.
    let u: f64 = b
        .iter()
        .map(|y| a.iter().map(|x| if y > x { 1.0 } else if y == x { 0.5 } else { 0.0 }).sum::<f64>())
        .sum();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let z = (u - n1 * n2 / 2.0) / (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    assert!(z > 5.0, "U = {u}, z = {z}");
    // Probability of superiority.
    assert!(u / (n1 * n2) > 0.95, "P(ood > in_dist) = {}", u / (n1 * n2));
}
