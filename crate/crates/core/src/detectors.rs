//! Post-hoc confidence scores. Larger always means "more in-distribution".

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{log_sum_exp, softmax, LinearClassifier};
use crate::error::{invalid, LabError, Result};
use crate::linalg::Vector;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "MSP")]
    Msp,
    #[serde(rename = "EBO")]
    Ebo,
    #[serde(rename = "GradNorm")]
    GradNorm,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Msp, ScoreKind::Ebo, ScoreKind::GradNorm];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Msp => "MSP",
            ScoreKind::Ebo => "EBO",
            ScoreKind::GradNorm => "GradNorm",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "msp" => Ok(ScoreKind::Msp),
            "ebo" | "energy" => Ok(ScoreKind::Ebo),
            "gradnorm" => Ok(ScoreKind::GradNorm),
            other => Err(invalid(format!("unknown detector `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunction {
    pub kind: ScoreKind,
    /// Only read by EBO.
    pub temperature: f64,
}

impl ScoreFunction {
    pub fn new(kind: ScoreKind) -> Self {
        Self { kind, temperature: 1.0 }
    }

    pub fn with_temperature(kind: ScoreKind, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(invalid(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { kind, temperature })
    }

    pub fn standard_set() -> Vec<ScoreFunction> {
        ScoreKind::ALL.into_iter().map(ScoreFunction::new).collect()
    }

    pub fn score(&self, clf: &LinearClassifier, x: &[f64]) -> f64 {
        match self.kind {
            ScoreKind::Msp => msp_score(clf, x),
            ScoreKind::Ebo => ebo_score(clf, x, self.temperature),
            ScoreKind::GradNorm => gradnorm_score(clf, x),
        }
    }

    pub fn score_all(&self, clf: &LinearClassifier, inputs: &[Vector], exec: Execution) -> Vec<f64> {
        par::map_slice(exec, inputs, |x| self.score(clf, x))
    }
}

/// Maximum softmax probability.
pub fn msp_score(clf: &LinearClassifier, x: &[f64]) -> f64 {
    msp_from_logits(&clf.logits(x))
}

pub fn msp_from_logits(logits: &[f64]) -> f64 {
    softmax(logits).into_iter().fold(0.0, f64::max)
}

/// Negative energy `T · log Σ exp(z_j / T)`.
pub fn ebo_score(clf: &LinearClassifier, x: &[f64], temperature: f64) -> f64 {
    ebo_from_logits(&clf.logits(x), temperature)
}

pub fn ebo_from_logits(logits: &[f64], temperature: f64) -> f64 {
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    temperature * log_sum_exp(&scaled)
}

/// `‖(p(x) − u) xᵀ‖₁` with `u` uniform: the L1 norm of the weight gradient
/// of the cross-entropy between uniform targets and the softmax output.
/// The outer product's L1 norm factors as `‖p − u‖₁ · ‖x‖₁`.
pub fn gradnorm_score(clf: &LinearClassifier, x: &[f64]) -> f64 {
    gradnorm_from_logits(&clf.logits(x), x)
}

pub fn gradnorm_from_logits(logits: &[f64], x: &[f64]) -> f64 {
    let uniform = 1.0 / logits.len() as f64;
    let p_dev: f64 = softmax(logits).iter().map(|p| (p - uniform).abs()).sum();
    let x_l1: f64 = x.iter().map(|v| v.abs()).sum();
    p_dev * x_l1
}
