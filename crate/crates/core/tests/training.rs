use std::sync::OnceLock;

use ood_lab::eval::accuracy;
use ood_lab::gaussians::{canonical_id_means, sample, standard_scenario, SeededRng, Stream};
use ood_lab::{train, train_with, LinearClassifier, Mat, TrainConfig, TrainOptions, TrainTrace};

fn covariate_max(w: &Mat) -> f64 {
    (0..w.rows())
        .flat_map(|i| [w.get(i, 2), w.get(i, 3)])
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn semantic_norm(w: &Mat) -> f64 {
    (0..w.rows())
        .flat_map(|i| [w.get(i, 0), w.get(i, 1)])
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn protocol_run() -> &'static (LinearClassifier, TrainTrace) {
    static RUN: OnceLock<(LinearClassifier, TrainTrace)> = OnceLock::new();
    RUN.get_or_init(|| {
        let scenario = standard_scenario(2.0).unwrap().remove(0);
        train(&scenario, &TrainConfig::default().with_seed(11)).unwrap()
    })
}

#[test]
fn covariate_weights_stay_small_after_warmup() {
    let (clf, trace) = protocol_run();
    for snap in trace.snapshots.iter().filter(|s| s.epoch > 50) {
        assert!(covariate_max(&snap.weights) < 0.05, "epoch {}", snap.epoch);
    }
    assert!(covariate_max(clf.weights()) < 0.05);
}

#[test]
fn semantic_weights_keep_growing() {
    let (_, trace) = protocol_run();
    let early = semantic_norm(trace.snapshot_at(100).unwrap());
    let late = semantic_norm(trace.snapshot_at(5000).unwrap());
    assert!(late > early, "{early} -> {late}");
    let losses = trace.loss_series();
    assert!(losses.last().unwrap() < &losses[100]);
}

#[test]
fn accuracy_approaches_nearest_mean_rule() {
    let (clf, _) = protocol_run();
    let means = canonical_id_means(2.0);
    let scenario = standard_scenario(2.0).unwrap().remove(0);
    let mut rng = SeededRng::with_stream(99, Stream::Custom(1));
    let (mut inputs, mut labels) = (Vec::new(), Vec::new());
    for class in 0..4 {
        for x in sample(&scenario.id_class(class), 20_000, &mut rng) {
            inputs.push(x);
            labels.push(class);
        }
    }
    // Equal priors and shared identity covariance: the Bayes rule is the nearest mean.
    let bayes_hits = inputs
        .iter()
        .zip(&labels)
        .filter(|(x, &y)| {
            let dist = |m: &Vec<f64>| m.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            (0..4).min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b]))).unwrap() == y
        })
        .count();
    let bayes = bayes_hits as f64 / inputs.len() as f64;
    let acc = accuracy(clf, &inputs, &labels);
    assert!(bayes > 0.9, "{bayes}");
    assert!(acc > 0.9 && acc >= bayes - 0.01, "accuracy {acc}, Bayes {bayes}");
}

#[test]
fn covariate_weights_decay_from_nonzero_start() {
    let scenario = standard_scenario(2.0).unwrap().remove(0);
    // Identical rows shift every logit by the same constant, so predictions
    // start balanced.
    let mut w = Mat::zeros(4, 4);
    for i in 0..4 {
        w.set(i, 2, 1.0);
        w.set(i, 3, 1.0);
    }
    let cfg = TrainConfig {
        snapshot_every: 50,
        ..TrainConfig::default().with_seed(4)
    };
    let options = TrainOptions {
        initial_weights: Some(w),
        ..TrainOptions::default()
    };
    let (clf, trace) = train_with(&scenario, &cfg, &options).unwrap();
    let checkpoints = [0, 50, 100, 200, 500, 1000, 2000, 3000, 4000];
    let values: Vec<f64> = checkpoints
        .iter()
        .map(|&e| covariate_max(trace.snapshot_at(e).unwrap()))
        .collect();
    for pair in values.windows(2) {
        if pair[0] < 0.05 {
            break;
        }
        assert!(pair[1] <= pair[0], "{values:?}");
    }
    assert!(covariate_max(clf.weights()) < 0.05, "{values:?}");
}

#[test]
fn scrambled_training_is_the_rotated_plain_run() {
    let scenario = standard_scenario(2.0).unwrap().remove(0);
    let q = ood_lab::gaussians::random_orthogonal(4, &mut SeededRng::with_stream(3, Stream::Scramble));
    let cfg = TrainConfig::default().with_seed(3).with_epochs(300);
    let (plain, _) = train(&scenario, &cfg).unwrap();
    let (rotated, _) = train(&scenario.clone().with_scramble(q.clone()).unwrap(), &cfg).unwrap();
    assert!(plain.weights().max_abs_diff(&rotated.weights().matmul(&q)) < 1e-10);
}
