//! Seeded sampling from N(μ, I) and the canonical four-class scenarios.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, Mat, Vector};

/// Independent sub-streams of one seed. Each consumer of randomness in a
/// run reads its own stream, so adding a consumer never perturbs another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Training,
    IdEvaluation,
    Scramble,
    CouplingTransform,
    OodEvaluation(u32),
    Custom(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Training => 0,
            Stream::IdEvaluation => 1,
            Stream::Scramble => 2,
            Stream::CouplingTransform => 3,
            Stream::OodEvaluation(i) => 1_000 + u64::from(i),
            Stream::Custom(i) => 1 << 32 | i,
        }
    }
}

/// Deterministic normal/uniform source. ChaCha8 is counter-based and its
/// output is specified bit-for-bit, so streams agree across platforms.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, Stream::Training)
    }

    pub fn with_stream(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.id());
        Self { inner, spare: None }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Standard normal via the Box–Muller transform; the second variate of
    /// each pair is cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassLabel {
    /// Zero-based in-distribution class index.
    Id(usize),
    Ood,
}

/// N(mean, I).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClassSpec {
    pub mean: Vector,
    pub label: ClassLabel,
}

/// Draw `n` i.i.d. samples from N(spec.mean, I).
pub fn sample(spec: &GaussianClassSpec, n: usize, rng: &mut SeededRng) -> Vec<Vector> {
    (0..n)
        .map(|_| spec.mean.iter().map(|m| m + rng.standard_normal()).collect())
        .collect()
}

/// Like [`sample`], then maps every draw through `transform` (x ↦ Qx).
pub fn sample_transformed(
    spec: &GaussianClassSpec,
    n: usize,
    transform: Option<&Mat>,
    rng: &mut SeededRng,
) -> Vec<Vector> {
    let draws = sample(spec, n, rng);
    match transform {
        Some(q) => draws.iter().map(|x| q.mul_vec(x)).collect(),
        None => draws,
    }
}

/// `min_i ‖μ_o − μ_i‖²`, the squared separation of an OOD mean from the
/// ID means.
pub fn min_pairwise_distance(means: &[Vector], ood_mean: &[f64]) -> Result<f64> {
    if means.is_empty() {
        return Err(invalid("no ID means given"));
    }
    Ok(means
        .iter()
        .map(|m| linalg::norm_sq(&linalg::sub(ood_mean, m)))
        .fold(f64::INFINITY, f64::min))
}

/// ID classes plus one OOD class whose mean is split into a semantic part
/// `s_o` and a covariate part `c_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub sigma: f64,
    pub id_means: Vec<Vector>,
    pub ood_semantic: Vector,
    pub ood_covariate: Vector,
    /// Orthogonal map applied to every sample after it is drawn.
    pub scramble: Option<Mat>,
}

impl ScenarioSpec {
    pub fn dim(&self) -> usize {
        self.ood_semantic.len()
    }

    pub fn num_classes(&self) -> usize {
        self.id_means.len()
    }

    pub fn ood_mean(&self) -> Vector {
        linalg::add(&self.ood_semantic, &self.ood_covariate)
    }

    pub fn id_class(&self, index: usize) -> GaussianClassSpec {
        GaussianClassSpec {
            mean: self.id_means[index].clone(),
            label: ClassLabel::Id(index),
        }
    }

    pub fn ood_class(&self) -> GaussianClassSpec {
        GaussianClassSpec {
            mean: self.ood_mean(),
            label: ClassLabel::Ood,
        }
    }

    pub fn with_scramble(mut self, q: Mat) -> Result<Self> {
        self.scramble = Some(q);
        self.validate()?;
        Ok(self)
    }

    pub fn with_ood(mut self, label: impl Into<String>, semantic: Vector, covariate: Vector) -> Self {
        self.label = label.into();
        self.ood_semantic = semantic;
        self.ood_covariate = covariate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        let d = self.dim();
        if self.id_means.len() < 2 {
            return Err(invalid("a scenario needs at least two ID classes"));
        }
        let all = self
            .id_means
            .iter()
            .chain([&self.ood_semantic, &self.ood_covariate]);
        for v in all {
            if v.len() != d {
                return Err(invalid("scenario vectors disagree on dimension"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("scenario vectors must be finite"));
            }
        }
        for i in 0..self.id_means.len() {
            for j in i + 1..self.id_means.len() {
                if self.id_means[i] == self.id_means[j] {
                    return Err(invalid(format!("ID means {i} and {j} coincide")));
                }
            }
        }
        if let Some(q) = &self.scramble {
            if q.rows() != d || q.cols() != d {
                return Err(invalid("scramble matrix has the wrong shape"));
            }
            let err = q.orthogonality_error();
            if err > 1e-10 {
                return Err(invalid(format!("scramble matrix is not orthogonal (error {err:.3e})")));
            }
        }
        Ok(())
    }
}

/// The four σ-scaled ID means: semantic signs on axes 1–2, a shared
/// covariate offset on axes 3–4.
pub fn canonical_id_means(sigma: f64) -> Vec<Vector> {
    let s = sigma;
    vec![
        vec![s, s, s, s],
        vec![s, -s, s, s],
        vec![-s, s, s, s],
        vec![-s, -s, s, s],
    ]
}

/// Covariate placements of the OOD mean, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateOffset {
    /// `[0,0,σ,σ]`: same covariate part as the ID classes.
    PlusPlus,
    /// `[0,0,−σ,σ]`
    MinusPlus,
    /// `[0,0,−σ,−σ]`
    MinusMinus,
}

impl CovariateOffset {
    pub const ALL: [CovariateOffset; 3] = [Self::PlusPlus, Self::MinusPlus, Self::MinusMinus];

    pub fn vector(self, sigma: f64) -> Vector {
        let s = sigma;
        match self {
            Self::PlusPlus => vec![0.0, 0.0, s, s],
            Self::MinusPlus => vec![0.0, 0.0, -s, s],
            Self::MinusMinus => vec![0.0, 0.0, -s, -s],
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::PlusPlus => "c_pp",
            Self::MinusPlus => "c_mp",
            Self::MinusMinus => "c_mm",
        }
    }
}

impl fmt::Display for CovariateOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

fn base_scenario(sigma: f64) -> Result<ScenarioSpec> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(ScenarioSpec {
        label: String::new(),
        sigma,
        id_means: canonical_id_means(sigma),
        ood_semantic: vec![0.0; 4],
        ood_covariate: vec![0.0; 4],
        scramble: None,
    })
}

/// The six (s_o, c_o) combinations: `s_o ∈ {[σ,σ,0,0], [0,σ,0,0]}` times
/// the three covariate offsets. The first three have no semantic shift.
pub fn standard_scenario(sigma: f64) -> Result<Vec<ScenarioSpec>> {
    let base = base_scenario(sigma)?;
    let semantic = [
        ("no_shift", vec![sigma, sigma, 0.0, 0.0]),
        ("shift", vec![0.0, sigma, 0.0, 0.0]),
    ];
    let mut out = Vec::with_capacity(6);
    for (tag, s_o) in semantic {
        for c in CovariateOffset::ALL {
            out.push(base.clone().with_ood(format!("{tag}/{c}"), s_o.clone(), c.vector(sigma)));
        }
    }
    Ok(out)
}

/// Shift degrees swept in the δ study, as fractions of σ.
pub const DELTA_FACTORS: [f64; 4] = [0.25, 0.50, 0.75, 1.00];

/// OOD class at semantic distance `delta_factor·σ` from class 1's semantic
/// part, along axis 1: `s_o = [(1 − f)σ, σ, 0, 0]`, `c_o = [0,0,σ,σ]`.
pub fn delta_scenario(sigma: f64, delta_factor: f64) -> Result<ScenarioSpec> {
    if !DELTA_FACTORS.iter().any(|f| (f - delta_factor).abs() < 1e-12) {
        return Err(invalid(format!(
            "unsupported shift degree {delta_factor}σ; expected one of 0.25, 0.50, 0.75, 1.00"
        )));
    }
    let base = base_scenario(sigma)?;
    let s_o = vec![(1.0 - delta_factor) * sigma, sigma, 0.0, 0.0];
    Ok(base.with_ood(
        format!("delta_{delta_factor:.2}"),
        s_o,
        CovariateOffset::PlusPlus.vector(sigma),
    ))
}

/// Haar-distributed orthogonal matrix: orthonormalize the columns of a
/// standard Gaussian matrix. Gram–Schmidt on columns is QR with a positive
/// R diagonal, which is the sign normalization Haar sampling needs.
pub fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Mat {
    loop {
        let columns: Vec<Vector> = (0..d)
            .map(|_| (0..d).map(|_| rng.standard_normal()).collect())
            .collect();
        let q = linalg::gram_schmidt(&columns, linalg::DEFAULT_ZERO_TOL)
            .expect("columns share a dimension");
        // A singular draw has probability zero; redraw if it happens.
        if q.len() == d {
            return Mat::from_columns(&q).expect("square");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_means_at_sigma_two() {
        let m = canonical_id_means(2.0);
        assert_eq!(m[0], vec![2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m[1], vec![2.0, -2.0, 2.0, 2.0]);
        assert_eq!(m[2], vec![-2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m[3], vec![-2.0, -2.0, 2.0, 2.0]);
        assert_eq!(canonical_id_means(1.0)[0], vec![1.0; 4]);
    }

    #[test]
    fn standard_variants() {
        let variants = standard_scenario(2.0).unwrap();
        assert_eq!(variants.len(), 6);
        let shifted_mp = &variants[4];
        assert_eq!(shifted_mp.ood_semantic, vec![0.0, 2.0, 0.0, 0.0]);
        assert_eq!(shifted_mp.ood_covariate, vec![0.0, 0.0, -2.0, 2.0]);
        assert_eq!(shifted_mp.ood_mean(), vec![0.0, 2.0, -2.0, 2.0]);
        for v in &variants {
            v.validate().unwrap();
            let sum: Vec<f64> = v.ood_semantic.iter().zip(&v.ood_covariate).map(|(a, b)| a + b).collect();
            assert_eq!(v.ood_mean(), sum);
        }
        assert!(standard_scenario(0.0).is_err());
    }

    #[test]
    fn delta_variants() {
        assert_eq!(delta_scenario(2.0, 0.25).unwrap().ood_semantic, vec![1.5, 2.0, 0.0, 0.0]);
        assert_eq!(delta_scenario(2.0, 0.50).unwrap().ood_semantic, vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(delta_scenario(2.0, 1.00).unwrap().ood_semantic, vec![0.0, 2.0, 0.0, 0.0]);
        assert_eq!(delta_scenario(2.0, 1.00).unwrap().ood_covariate, vec![0.0, 0.0, 2.0, 2.0]);
        assert!(delta_scenario(2.0, 0.3).is_err());
    }

    #[test]
    fn min_distance_examples() {
        assert_eq!(min_pairwise_distance(&[vec![0.0, 0.0]], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(min_pairwise_distance(&[vec![1.0, 2.0]], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(min_pairwise_distance(&[], &[1.0]).is_err());

        // Brute force over the four σ = 2 means for μ_o = μ₁ + [0,0,−4,0].
        let means = canonical_id_means(2.0);
        let ood = vec![2.0, 2.0, -2.0, 2.0];
        let mut best = f64::INFINITY;
        for m in &means {
            let mut acc = 0.0;
            for k in 0..4 {
                acc += (ood[k] - m[k]) * (ood[k] - m[k]);
            }
            best = best.min(acc);
        }
        assert_eq!(best, 16.0);
        assert_eq!(min_pairwise_distance(&means, &ood).unwrap(), best);
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = GaussianClassSpec {
            mean: vec![1.0, -1.0, 0.5],
            label: ClassLabel::Id(0),
        };
        let a = sample(&spec, 1, &mut SeededRng::new(7));
        let b = sample(&spec, 1, &mut SeededRng::new(7));
        assert_eq!(a, b);
        let c = sample(&spec, 1, &mut SeededRng::with_stream(7, Stream::IdEvaluation));
        assert_ne!(a, c);
    }

    fn moments(samples: &[Vector], axis: usize) -> (f64, f64, f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|x| x[axis]).sum::<f64>() / n;
        let central = |p: i32| samples.iter().map(|x| (x[axis] - mean).powi(p)).sum::<f64>() / n;
        let var = central(2);
        let skew = central(3) / var.powf(1.5);
        let exkurt = central(4) / (var * var) - 3.0;
        (mean, var, skew, exkurt)
    }

    #[test]
    fn sample_moments_converge() {
        let n = 100_000;
        let zero = GaussianClassSpec {
            mean: vec![0.0; 4],
            label: ClassLabel::Ood,
        };
        let draws = sample(&zero, n, &mut SeededRng::new(11));
        for axis in 0..4 {
            let (mean, _, skew, kurt) = moments(&draws, axis);
            // 3/√n ≈ 0.0095 stays inside the 0.02 bound.
            assert!(mean.abs() < 0.02, "axis {axis} mean {mean}");
            assert!(skew.abs() <= 0.05, "axis {axis} skew {skew}");
            assert!(kurt.abs() <= 0.1, "axis {axis} excess kurtosis {kurt}");
        }

        let mu1 = GaussianClassSpec {
            mean: canonical_id_means(2.0)[0].clone(),
            label: ClassLabel::Id(0),
        };
        let draws = sample(&mu1, n, &mut SeededRng::new(12));
        for axis in 0..4 {
            let (mean, var, _, _) = moments(&draws, axis);
            assert!((mean - 2.0).abs() < 0.02);
            assert!((var - 1.0).abs() < 0.03, "axis {axis} var {var}");
        }
    }

    #[test]
    fn random_orthogonal_is_orthogonal_and_seeded() {
        let q = random_orthogonal(4, &mut SeededRng::new(3));
        assert!(q.orthogonality_error() < 1e-12);
        assert!(q.transpose().orthogonality_error() < 1e-12);
        assert_eq!(q, random_orthogonal(4, &mut SeededRng::new(3)));
    }

    #[test]
    fn scenario_validation() {
        let mut s = standard_scenario(2.0).unwrap().remove(0);
        s.id_means[1] = s.id_means[0].clone();
        assert!(s.validate().is_err());
        let s = standard_scenario(2.0).unwrap().remove(0);
        let bad = Mat::from_rows(&vec![vec![1.0, 1.0, 0.0, 0.0]; 4]).unwrap();
        assert!(s.with_scramble(bad).is_err());
    }
}
