//! AUROC and the mechanical checks on trained classifiers.

use serde::{Deserialize, Serialize};

use crate::classifier::{self, LinearClassifier, TrainConfig};
use crate::error::{invalid, Result};
use crate::gaussians::ScenarioSpec;
use crate::linalg::{self, Mat, Vector};
use crate::par::{self, Execution};
use crate::spaces::SemanticDecomposition;
use crate::verdict::VerificationVerdict;

pub const PROP2_TOL: f64 = 0.05;
pub const THEOREM1_TOL: f64 = 0.02;
pub const LEMMA1_TOL: f64 = 1e-8;

/// How close two semantic projections must be for the logit check to
/// apply.
pub const SEMANTIC_PREMISE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Id,
    Ood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub value: f64,
    pub origin: Origin,
}

/// P(score_ID > score_OOD) with ties counted as one half.
///
/// Sorts the pooled scores once and sweeps tie groups, accumulating twice
/// the Mann–Whitney U in an integer so the result is the exact pairwise
/// fraction.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    if id_scores.is_empty() || ood_scores.is_empty() {
        return Err(invalid("AUROC needs at least one ID and one OOD score"));
    }
    if id_scores.iter().chain(ood_scores).any(|s| !s.is_finite()) {
        return Err(invalid("AUROC scores must be finite"));
    }
    let mut pooled: Vec<ScoreSample> = id_scores
        .iter()
        .map(|&value| ScoreSample { value, origin: Origin::Id })
        .chain(ood_scores.iter().map(|&value| ScoreSample { value, origin: Origin::Ood }))
        .collect();
    pooled.sort_by(|a, b| a.value.total_cmp(&b.value));

    let mut twice_u: u128 = 0;
    let mut ood_below: u128 = 0;
    let mut start = 0;
    while start < pooled.len() {
        let value = pooled[start].value;
        let mut end = start;
        let (mut id_here, mut ood_here) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal, so group by ==, not total order.
        while end < pooled.len() && pooled[end].value == value {
            match pooled[end].origin {
                Origin::Id => id_here += 1,
                Origin::Ood => ood_here += 1,
            }
            end += 1;
        }
        twice_u += id_here * (2 * ood_below + ood_here);
        ood_below += ood_here;
        start = end;
    }
    let pairs = 2 * id_scores.len() as u128 * ood_scores.len() as u128;
    Ok(twice_u as f64 / pairs as f64)
}

/// `‖W(μ_a − μ_b)‖ / max(1, ‖W‖_F ‖μ_a − μ_b‖)` for two means with the
/// same semantic part. A classifier whose covariate columns vanish maps
/// both to the same logit distribution.
pub fn theorem1_check(
    clf: &LinearClassifier,
    mu_a: &[f64],
    mu_b: &[f64],
    dec: &SemanticDecomposition,
    tol: f64,
) -> Result<VerificationVerdict> {
    if mu_a.len() != clf.input_dim() || mu_b.len() != clf.input_dim() || dec.dim() != clf.input_dim() {
        return Err(invalid("dimension mismatch"));
    }
    let gap = linalg::norm(&linalg::sub(&dec.semantic_part(mu_a), &dec.semantic_part(mu_b)));
    if gap > SEMANTIC_PREMISE_TOL {
        return Err(invalid(format!(
            "means differ in the semantic space by {gap:.3e}; the logit check would be vacuous"
        )));
    }
    let diff = linalg::sub(mu_a, mu_b);
    let logit_gap = linalg::norm(&clf.weights().mul_vec(&diff));
    let scale = (clf.weights().frobenius_norm() * linalg::norm(&diff)).max(1.0);
    Ok(VerificationVerdict::at_most("theorem1_logit_gap", logit_gap / scale, tol))
}

/// `W̃ = W Qᵀ`, the weights in the semantic/covariate frame.
pub fn rotated_weights(clf: &LinearClassifier, dec: &SemanticDecomposition) -> Mat {
    clf.weights().matmul_transposed(&dec.q_matrix)
}

/// Largest `|W̃_ij|` over the covariate columns `j > r`.
pub fn prop2_check(clf: &LinearClassifier, dec: &SemanticDecomposition, tol: f64) -> Result<VerificationVerdict> {
    if dec.dim() != clf.input_dim() {
        return Err(invalid("dimension mismatch"));
    }
    let rotated = rotated_weights(clf, dec);
    let mut worst = 0.0_f64;
    for i in 0..rotated.rows() {
        for j in dec.rank..rotated.cols() {
            worst = worst.max(rotated.get(i, j).abs());
        }
    }
    Ok(VerificationVerdict::at_most("prop2_covariate_columns", worst, tol))
}

/// Train twice on one sample stream, once on `x` and once on `q·x`, and
/// compare `W_A` with `W_B q` at every snapshot.
pub fn lemma1_check(
    scenario: &ScenarioSpec,
    cfg: &TrainConfig,
    q: &Mat,
    tol: f64,
    exec: Execution,
) -> Result<VerificationVerdict> {
    let d = scenario.dim();
    if q.rows() != d || q.cols() != d {
        return Err(invalid("transform has the wrong shape"));
    }
    let err = q.orthogonality_error();
    if err > 1e-10 {
        return Err(invalid(format!("transform is not orthogonal (error {err:.3e})")));
    }
    let base = scenario.scramble.clone().unwrap_or_else(|| Mat::identity(d));
    let coupled = ScenarioSpec {
        scramble: Some(q.matmul(&base)),
        ..scenario.clone()
    };
    let (run_a, run_b) = par::join(
        exec,
        || classifier::train(scenario, cfg),
        || classifier::train(&coupled, cfg),
    );
    let (_, trace_a) = run_a?;
    let (_, trace_b) = run_b?;

    let mut worst = 0.0_f64;
    for (a, b) in trace_a.snapshots.iter().zip(&trace_b.snapshots) {
        debug_assert_eq!(a.epoch, b.epoch);
        worst = worst.max(a.weights.max_abs_diff(&b.weights.matmul(q)));
    }
    Ok(VerificationVerdict::at_most("lemma1_coupled_training", worst, tol))
}

/// Fraction of `inputs` whose predicted class matches `labels`.
pub fn accuracy(clf: &LinearClassifier, inputs: &[Vector], labels: &[usize]) -> f64 {
    let hits = inputs
        .iter()
        .zip(labels)
        .filter(|(x, &y)| clf.predict(x) == y)
        .count();
    hits as f64 / inputs.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussians::{canonical_id_means, random_orthogonal, standard_scenario, SeededRng};
    use crate::spaces::build_semantic_decomposition;
    use proptest::prelude::*;

    fn brute_force_auroc(id: &[f64], ood: &[f64]) -> f64 {
        let mut twice = 0u64;
        for a in id {
            for b in ood {
                if a > b {
                    twice += 2;
                } else if a == b {
                    twice += 1;
                }
            }
        }
        twice as f64 / (2 * id.len() * ood.len()) as f64
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(brute_force_auroc(&[1.0, 0.0], &[0.5]), 0.5);
        assert_eq!(auroc(&[1.0, 0.0], &[0.5]).unwrap(), 0.5);
        assert_eq!(auroc(&[-0.0], &[0.0]).unwrap(), 0.5);
        assert!(auroc(&[], &[1.0]).is_err());
        assert!(auroc(&[f64::NAN], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn auroc_matches_brute_force(
            id in prop::collection::vec(0i32..20, 1..100),
            ood in prop::collection::vec(0i32..20, 1..100),
        ) {
            // Small integer range forces plenty of ties.
            let id: Vec<f64> = id.into_iter().map(f64::from).collect();
            let ood: Vec<f64> = ood.into_iter().map(f64::from).collect();
            let a = auroc(&id, &ood).unwrap();
            prop_assert_eq!(a, brute_force_auroc(&id, &ood));
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((auroc(&ood, &id).unwrap() - (1.0 - a)).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn theorem1_trivial_and_premise() {
        let dec = build_semantic_decomposition(&canonical_id_means(2.0)).unwrap();
        let clf = LinearClassifier::zeros(4, 4);
        let mu = [2.0, 2.0, 2.0, 2.0];
        let v = theorem1_check(&clf, &mu, &mu, &dec, THEOREM1_TOL).unwrap();
        assert!(v.pass && v.statistic == 0.0);
        assert!(theorem1_check(&clf, &mu, &[0.0, 2.0, 2.0, 2.0], &dec, THEOREM1_TOL).is_err());
    }

    #[test]
    fn theorem1_fails_for_unstructured_weights() {
        let dec = build_semantic_decomposition(&canonical_id_means(2.0)).unwrap();
        let mut rng = SeededRng::new(9);
        let w = Mat::from_rows(
            &(0..4)
                .map(|_| (0..4).map(|_| rng.standard_normal()).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let clf = LinearClassifier::from_weights(w).unwrap();
        let v = theorem1_check(&clf, &[2.0, 2.0, 2.0, 2.0], &[2.0, 2.0, -2.0, 2.0], &dec, THEOREM1_TOL).unwrap();
        assert!(!v.pass, "{v}");
    }

    #[test]
    fn prop2_on_zero_and_covariate_weights() {
        let dec = build_semantic_decomposition(&canonical_id_means(2.0)).unwrap();
        let v = prop2_check(&LinearClassifier::zeros(4, 4), &dec, PROP2_TOL).unwrap();
        assert!(v.pass && v.statistic == 0.0);

        let mut w = Mat::zeros(4, 4);
        w.set(1, 3, 0.3);
        w.set(0, 0, 5.0);
        let v = prop2_check(&LinearClassifier::from_weights(w).unwrap(), &dec, PROP2_TOL).unwrap();
        assert!(!v.pass);
        assert!((v.statistic - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lemma1_identity_and_permutation() {
        let scenario = standard_scenario(2.0).unwrap().remove(0);
        let cfg = TrainConfig {
            epochs: 60,
            seed: 4,
            ..TrainConfig::default()
        };
        let v = lemma1_check(&scenario, &cfg, &Mat::identity(4), 0.0, Execution::Sequential).unwrap();
        assert!(v.pass && v.statistic == 0.0);

        let perm = Mat::from_rows(&[
            vec![0.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let v = lemma1_check(&scenario, &cfg, &perm, 1e-12, Execution::default()).unwrap();
        assert!(v.pass, "{v}");
    }

    #[test]
    fn lemma1_random_rotation_short_run() {
        let scenario = standard_scenario(2.0).unwrap().remove(0);
        let cfg = TrainConfig {
            epochs: 100,
            seed: 8,
            ..TrainConfig::default()
        };
        let q = random_orthogonal(4, &mut SeededRng::new(77));
        let v = lemma1_check(&scenario, &cfg, &q, LEMMA1_TOL, Execution::default()).unwrap();
        assert!(v.pass, "{v}");

        let skew = Mat::from_rows(&[vec![1.0, 0.1, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(lemma1_check(&scenario, &cfg, &skew, LEMMA1_TOL, Execution::Sequential).is_err());
    }
}
