//! Bias-free linear softmax classifier `p(x) = softmax(Wx)`, trained with
//! full-batch heavy-ball momentum on cross-entropy plus `λ/2 ‖W‖²`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::format::sig6;
use crate::gaussians::{self, ScenarioSpec, SeededRng, Stream};
use crate::linalg::{self, Mat, Vector};
use crate::verdict::VerificationVerdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    weights: Mat,
}

impl LinearClassifier {
    pub fn zeros(num_classes: usize, input_dim: usize) -> Self {
        Self {
            weights: Mat::zeros(num_classes, input_dim),
        }
    }

    pub fn from_weights(weights: Mat) -> Result<Self> {
        if !weights.is_finite() {
            return Err(invalid("classifier weights must be finite"));
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(invalid("classifier needs at least one class and one input"));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Mat {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Vector {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        self.weights.mul_vec(x)
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Vector {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// `log Σ exp(z_j)` with the max factored out.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vector = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Inputs with zero-based class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub inputs: Vec<Vector>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, x: Vector, label: usize) {
        self.inputs.push(x);
        self.labels.push(label);
    }
}

/// Statistics of the classifier on one epoch's batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Batch mean of `p_i(x)` per class.
    pub class_mean_probs: Vec<f64>,
    /// `W_ij · Cov(p_i(x), x_j)`, covariance over the batch with divisor n.
    pub cov_products: Mat,
}

struct BatchEvaluation {
    loss: f64,
    grad: Mat,
    record_probs: Vec<f64>,
    cov_products: Mat,
}

fn check_batch(clf: &LinearClassifier, batch: &Batch) -> Result<()> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if batch.inputs.len() != batch.labels.len() {
        return Err(invalid("batch inputs and labels differ in length"));
    }
    let k = clf.num_classes();
    if let Some(bad) = batch.labels.iter().find(|&&y| y >= k) {
        return Err(invalid(format!("label {bad} out of range for {k} classes")));
    }
    if batch.inputs.iter().any(|x| x.len() != clf.input_dim()) {
        return Err(invalid("batch input dimension mismatch"));
    }
    Ok(())
}

fn evaluate_batch(clf: &LinearClassifier, batch: &Batch, weight_decay: f64) -> BatchEvaluation {
    let (k, d) = (clf.num_classes(), clf.input_dim());
    let n = batch.len() as f64;
    let w = clf.weights();

    let mut ce = 0.0;
    let mut grad = Mat::zeros(k, d);
    let mut sum_p = vec![0.0; k];
    let mut sum_x = vec![0.0; d];
    let mut sum_px = Mat::zeros(k, d);

    for (x, &y) in batch.inputs.iter().zip(&batch.labels) {
        let logits = w.mul_vec(x);
        let lse = log_sum_exp(&logits);
        ce += lse - logits[y];
        let p = softmax(&logits);
        for i in 0..k {
            let residual = p[i] - if i == y { 1.0 } else { 0.0 };
            linalg::axpy(residual, x, grad.row_mut(i));
            linalg::axpy(p[i], x, sum_px.row_mut(i));
            sum_p[i] += p[i];
        }
        linalg::axpy(1.0, x, &mut sum_x);
    }

    let mut grad = grad.scaled(1.0 / n);
    grad.add_scaled(weight_decay, w);
    let loss = ce / n + 0.5 * weight_decay * w.frobenius_norm_sq();

    let mean_p: Vec<f64> = sum_p.iter().map(|s| s / n).collect();
    let mut cov_products = Mat::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            let cov = sum_px.get(i, j) / n - mean_p[i] * (sum_x[j] / n);
            cov_products.set(i, j, w.get(i, j) * cov);
        }
    }

    BatchEvaluation {
        loss,
        grad,
        record_probs: mean_p,
        cov_products,
    }
}

/// Mean cross-entropy plus `λ/2 ‖W‖²`, and its gradient
/// `mean((p − onehot(y)) xᵀ) + λW`.
pub fn loss_and_grad(clf: &LinearClassifier, batch: &Batch, weight_decay: f64) -> Result<(f64, Mat)> {
    check_batch(clf, batch)?;
    let eval = evaluate_batch(clf, batch, weight_decay);
    Ok((eval.loss, eval.grad))
}

/// Monitor statistics for a fixed classifier on a batch.
pub fn epoch_record(clf: &LinearClassifier, batch: &Batch, weight_decay: f64, epoch: usize) -> Result<EpochRecord> {
    check_batch(clf, batch)?;
    let eval = evaluate_batch(clf, batch, weight_decay);
    Ok(EpochRecord {
        epoch,
        loss: eval.loss,
        class_mean_probs: eval.record_probs,
        cov_products: eval.cov_products,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub samples_per_class_per_epoch: usize,
    pub seed: u64,
    pub snapshot_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 0.01,
            momentum: 0.9,
            epochs: 5000,
            samples_per_class_per_epoch: 250,
            seed: 0,
            snapshot_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight_decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if self.samples_per_class_per_epoch == 0 {
            return Err(invalid("samples_per_class_per_epoch must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(invalid("snapshot_every must be at least 1"));
        }
        Ok(())
    }

    /// Covariate weights provably shrink only when `0 < ηλ < 1`.
    pub fn supports_convergence_bound(&self) -> bool {
        let rate = self.learning_rate * self.weight_decay;
        rate > 0.0 && rate < 1.0
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    pub epoch: usize,
    pub weights: Mat,
}

/// Weight snapshots plus one [`EpochRecord`] per epoch. Record `e` is
/// measured with the weights after `e` updates, on the batch used for
/// update `e + 1`; the final record uses an extra batch drawn after
/// training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub snapshots: Vec<WeightSnapshot>,
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn final_weights(&self) -> Option<&Mat> {
        self.snapshots.last().map(|s| &s.weights)
    }

    pub fn snapshot_at(&self, epoch: usize) -> Option<&Mat> {
        self.snapshots
            .binary_search_by_key(&epoch, |s| s.epoch)
            .ok()
            .map(|i| &self.snapshots[i].weights)
    }

    pub fn loss_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// CSV with one row per snapshot: epoch, loss, per-class mean
    /// probability, flattened weights, flattened monitor products.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.snapshots.first() else {
            out.push_str("epoch,loss\n");
            return out;
        };
        let (k, d) = (first.weights.rows(), first.weights.cols());
        let mut header = vec!["epoch".to_string(), "loss".to_string()];
        header.extend((1..=k).map(|i| format!("p_mean_{i}")));
        for prefix in ["w", "a2"] {
            for i in 1..=k {
                header.extend((1..=d).map(|j| format!("{prefix}_{i}_{j}")));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');

        for snap in &self.snapshots {
            let Some(rec) = self.records.get(snap.epoch) else {
                continue;
            };
            let mut fields = vec![snap.epoch.to_string(), sig6(rec.loss)];
            fields.extend(rec.class_mean_probs.iter().map(|&p| sig6(p)));
            fields.extend(snap.weights.as_slice().iter().map(|&w| sig6(w)));
            fields.extend(rec.cov_products.as_slice().iter().map(|&v| sig6(v)));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Knobs outside the standard protocol, used to probe the monitors and the
/// decay dynamics.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Per-class sample counts for every epoch; balanced when `None`.
    pub class_counts: Option<Vec<usize>>,
    /// Starting weights; zero when `None`.
    pub initial_weights: Option<Mat>,
}

fn draw_batch(scenario: &ScenarioSpec, counts: &[usize], rng: &mut SeededRng) -> Batch {
    let mut batch = Batch::default();
    for (class, &n) in counts.iter().enumerate() {
        let spec = scenario.id_class(class);
        for x in gaussians::sample_transformed(&spec, n, scenario.scramble.as_ref(), rng) {
            batch.push(x, class);
        }
    }
    batch
}

/// Zero-initialized balanced training on the scenario's ID classes.
pub fn train(scenario: &ScenarioSpec, cfg: &TrainConfig) -> Result<(LinearClassifier, TrainTrace)> {
    train_with(scenario, cfg, &TrainOptions::default())
}

pub fn train_with(
    scenario: &ScenarioSpec,
    cfg: &TrainConfig,
    options: &TrainOptions,
) -> Result<(LinearClassifier, TrainTrace)> {
    cfg.validate()?;
    scenario.validate()?;
    let (k, d) = (scenario.num_classes(), scenario.dim());
    let counts = match &options.class_counts {
        Some(c) if c.len() != k => return Err(invalid("class_counts length must equal the class count")),
        Some(c) if c.iter().all(|&n| n == 0) => return Err(invalid("class_counts are all zero")),
        Some(c) => c.clone(),
        None => vec![cfg.samples_per_class_per_epoch; k],
    };
    let mut clf = match &options.initial_weights {
        Some(w) if (w.rows(), w.cols()) != (k, d) => return Err(invalid("initial weights have the wrong shape")),
        Some(w) => LinearClassifier::from_weights(w.clone())?,
        None => LinearClassifier::zeros(k, d),
    };

    let mut rng = SeededRng::with_stream(cfg.seed, Stream::Training);
    let mut velocity = Mat::zeros(k, d);
    let mut snapshots = vec![WeightSnapshot {
        epoch: 0,
        weights: clf.weights.clone(),
    }];
    let mut records = Vec::with_capacity(cfg.epochs + 1);

    for epoch in 0..cfg.epochs {
        let batch = draw_batch(scenario, &counts, &mut rng);
        let eval = evaluate_batch(&clf, &batch, cfg.weight_decay);
        records.push(EpochRecord {
            epoch,
            loss: eval.loss,
            class_mean_probs: eval.record_probs,
            cov_products: eval.cov_products,
        });

        velocity = velocity.scaled(cfg.momentum);
        velocity.add_scaled(1.0, &eval.grad);
        clf.weights.add_scaled(-cfg.learning_rate, &velocity);

        let done = epoch + 1;
        if done % cfg.snapshot_every == 0 || done == cfg.epochs {
            snapshots.push(WeightSnapshot {
                epoch: done,
                weights: clf.weights.clone(),
            });
        }
    }

    let batch = draw_batch(scenario, &counts, &mut rng);
    records.push(epoch_record(&clf, &batch, cfg.weight_decay, cfg.epochs)?);

    Ok((clf, TrainTrace { snapshots, records }))
}

/// Every recorded per-class mean probability lies within `tol` of `1/k`.
pub fn monitor_assumption1(trace: &TrainTrace, tol: f64) -> Result<VerificationVerdict> {
    if trace.records.is_empty() {
        return Err(invalid("trace has no records"));
    }
    let worst = trace
        .records
        .iter()
        .flat_map(|r| {
            let uniform = 1.0 / r.class_mean_probs.len() as f64;
            r.class_mean_probs.iter().map(move |p| (p - uniform).abs())
        })
        .fold(0.0_f64, f64::max);
    Ok(VerificationVerdict::at_most("assumption1_balanced_predictions", worst, tol))
}

/// Every recorded `W_ij · Cov(p_i, x_j)` is at least `-tol`.
pub fn monitor_assumption2(trace: &TrainTrace, tol: f64) -> Result<VerificationVerdict> {
    if trace.records.is_empty() {
        return Err(invalid("trace has no records"));
    }
    let lowest = trace
        .records
        .iter()
        .flat_map(|r| r.cov_products.as_slice().iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(VerificationVerdict::at_least("assumption2_nonnegative_products", lowest, -tol))
}
