//! Semantic space (span of consecutive ID mean differences), its orthogonal
//! complement the covariate space, and the derived decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, Mat, OrthonormalBasis, Vector, DEFAULT_ZERO_TOL};

/// Default tolerance for the covariate-constancy check on exact means.
pub const COVARIATE_CONSTANCY_TOL: f64 = 1e-8;

/// Orthonormal frame of the input space whose first `rank` rows span the
/// semantic space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticDecomposition {
    pub basis: OrthonormalBasis,
    pub rank: usize,
    /// Rows are the basis vectors, semantic rows first.
    pub q_matrix: Mat,
}

impl SemanticDecomposition {
    pub fn dim(&self) -> usize {
        self.q_matrix.cols()
    }

    pub fn semantic_basis(&self) -> &[Vector] {
        self.basis.semantic_vectors()
    }

    pub fn covariate_basis(&self) -> &[Vector] {
        self.basis.complement_vectors()
    }

    /// proj_S(v)
    pub fn semantic_part(&self, v: &[f64]) -> Vector {
        linalg::project_unchecked(v, self.semantic_basis())
    }

    pub fn summary(&self, id_means: &[Vector]) -> DecompositionSummary {
        let c_const = id_means
            .first()
            .map(|m| decompose_mean(m, self).covariate)
            .unwrap_or_default();
        DecompositionSummary {
            rank: self.rank,
            basis_rows: self.basis.vectors.clone(),
            c_const,
        }
    }
}

/// Report-friendly view of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub rank: usize,
    pub basis_rows: Vec<Vector>,
    pub c_const: Vector,
}

/// `μ = s + c` with `s ∈ S`, `c ∈ C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDecomposition {
    pub semantic: Vector,
    pub covariate: Vector,
}

pub fn build_semantic_decomposition(id_means: &[Vector]) -> Result<SemanticDecomposition> {
    if id_means.len() < 2 {
        return Err(invalid(format!(
            "need at least two ID means, got {}",
            id_means.len()
        )));
    }
    let d = id_means[0].len();
    if id_means.iter().any(|m| m.len() != d) {
        return Err(invalid("ID means disagree on dimension"));
    }
    let diffs: Vec<Vector> = id_means
        .windows(2)
        .map(|w| linalg::sub(&w[0], &w[1]))
        .collect();
    let semantic = linalg::gram_schmidt(&diffs, DEFAULT_ZERO_TOL)?;
    let basis = linalg::extend_to_full_basis(&semantic, d, DEFAULT_ZERO_TOL)?;
    let q_matrix = basis.to_matrix();
    Ok(SemanticDecomposition {
        rank: basis.semantic_rank,
        basis,
        q_matrix,
    })
}

pub fn decompose_mean(mu: &[f64], dec: &SemanticDecomposition) -> MeanDecomposition {
    assert_eq!(mu.len(), dec.dim(), "dimension mismatch");
    let semantic = dec.semantic_part(mu);
    let covariate = linalg::sub(mu, &semantic);
    MeanDecomposition { semantic, covariate }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateConstancy {
    pub pass: bool,
    /// Largest pairwise distance between covariate components.
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Covariate component of the first mean.
    pub c_const: Vector,
}

/// Every ID mean should share one covariate component.
pub fn check_covariate_constancy(
    id_means: &[Vector],
    dec: &SemanticDecomposition,
    tol: f64,
) -> Result<CovariateConstancy> {
    if id_means.len() < 2 {
        return Err(invalid("need at least two ID means"));
    }
    let covariates: Vec<Vector> = id_means
        .iter()
        .map(|m| decompose_mean(m, dec).covariate)
        .collect();
    let mut max_deviation = 0.0_f64;
    for (i, a) in covariates.iter().enumerate() {
        for b in &covariates[i + 1..] {
            max_deviation = max_deviation.max(linalg::norm(&linalg::sub(a, b)));
        }
    }
    Ok(CovariateConstancy {
        pass: max_deviation <= tol,
        max_deviation,
        tolerance: tol,
        c_const: covariates[0].clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticDelta {
    /// `min_i ‖s_o − s_i‖²`
    pub squared: f64,
    /// `min_i ‖s_o − s_i‖`
    pub l2: f64,
}

/// Semantic distance of an OOD mean from the nearest ID mean, measured
/// after projecting both onto S.
pub fn semantic_delta(
    ood_mean: &[f64],
    id_means: &[Vector],
    dec: &SemanticDecomposition,
) -> Result<SemanticDelta> {
    if id_means.is_empty() {
        return Err(invalid("no ID means given"));
    }
    if ood_mean.len() != dec.dim() || id_means.iter().any(|m| m.len() != dec.dim()) {
        return Err(invalid("dimension mismatch"));
    }
    let s_o = dec.semantic_part(ood_mean);
    let squared = id_means
        .iter()
        .map(|m| linalg::norm_sq(&linalg::sub(&s_o, &dec.semantic_part(m))))
        .fold(f64::INFINITY, f64::min);
    Ok(SemanticDelta {
        squared,
        l2: squared.sqrt(),
    })
}
