//! Small dense linear algebra: vectors as `Vec<f64>`, a row-major [`Mat`],
//! Gram–Schmidt with zero-vector skipping, basis completion and orthogonal
//! projection. Dimensions here are single digits to a few hundred, so
//! everything is plain loops over contiguous storage.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point in the input space.
pub type Vector = Vec<f64>;

/// Residual norm below which a vector is treated as linearly dependent.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// Tolerance used when a caller-supplied set must already be orthonormal.
pub const ORTHONORMAL_INPUT_TOL: f64 = 1e-8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vector {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn unit_vector(d: usize, axis: usize) -> Vector {
    let mut e = vec![0.0; d];
    e[axis] = 1.0;
    e
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vector]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged rows in matrix construction"));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        Ok(Self::from_rows(columns)?.transpose())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vector> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vector {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(l), out.row_mut(i));
            }
        }
        out
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_transposed(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.set(i, j, dot(self.row(i), other.row(j)));
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        norm_sq(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest entry of `|self - other|`.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `max |(Q Qᵀ - I)_ij|` for a square matrix.
    pub fn orthogonality_error(&self) -> f64 {
        orthonormality_error(&self.to_rows())
    }
}

/// `max_ij |<q_i, q_j> - δ_ij|` over a list of vectors.
pub fn orthonormality_error(vectors: &[Vector]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(a, b) - target).abs());
        }
    }
    worst
}

fn check_common_dim(vectors: &[Vector]) -> Result<Option<usize>> {
    let Some(first) = vectors.first() else {
        return Ok(None);
    };
    let d = first.len();
    if let Some(bad) = vectors.iter().position(|v| v.len() != d) {
        return Err(invalid(format!(
            "vector {bad} has dimension {} but expected {d}",
            vectors[bad].len()
        )));
    }
    Ok(Some(d))
}

/// Remove the components of `v` along every vector of `basis`, twice.
/// A second sweep restores orthogonality lost to cancellation.
fn orthogonalize_against(v: &mut [f64], basis: &[Vector]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            axpy(-c, q, v);
        }
    }
}

/// Modified Gram–Schmidt with re-orthogonalization.
///
/// Inputs whose residual (after removing the span of the vectors already
/// accepted) has norm below `zero_tol` are skipped, so the output is an
/// orthonormal basis of `span(vectors)` with at most `min(n, d)` members.
pub fn gram_schmidt(vectors: &[Vector], zero_tol: f64) -> Result<Vec<Vector>> {
    if !(zero_tol > 0.0) {
        return Err(invalid(format!("zero_tol must be positive, got {zero_tol}")));
    }
    let Some(d) = check_common_dim(vectors)? else {
        return Ok(Vec::new());
    };
    let mut accepted: Vec<Vector> = Vec::with_capacity(vectors.len().min(d));
    for v in vectors {
        if accepted.len() == d {
            break;
        }
        let mut r = v.clone();
        orthogonalize_against(&mut r, &accepted);
        let n = norm(&r);
        if n < zero_tol {
            continue;
        }
        accepted.push(scale(&r, 1.0 / n));
    }
    Ok(accepted)
}

/// An orthonormal list whose first `semantic_rank` members span a
/// distinguished subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    pub vectors: Vec<Vector>,
    pub semantic_rank: usize,
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn semantic_vectors(&self) -> &[Vector] {
        &self.vectors[..self.semantic_rank]
    }

    pub fn complement_vectors(&self) -> &[Vector] {
        &self.vectors[self.semantic_rank..]
    }

    /// Matrix whose rows are the basis vectors.
    pub fn to_matrix(&self) -> Mat {
        Mat::from_rows(&self.vectors).expect("basis vectors share a dimension")
    }
}

/// Complete an orthonormal `partial` set to a basis of ℝᵈ by sweeping the
/// standard basis vectors e₁..e_d through Gram–Schmidt. The partial vectors
/// are kept bit-for-bit and become the leading `semantic_rank` members.
pub fn extend_to_full_basis(partial: &[Vector], d: usize, zero_tol: f64) -> Result<OrthonormalBasis> {
    if partial.len() > d {
        return Err(invalid(format!(
            "{} vectors cannot be orthonormal in dimension {d}",
            partial.len()
        )));
    }
    if let Some(bad) = partial.iter().position(|v| v.len() != d) {
        return Err(invalid(format!(
            "partial vector {bad} has dimension {} but expected {d}",
            partial[bad].len()
        )));
    }
    let err = orthonormality_error(partial);
    if err > ORTHONORMAL_INPUT_TOL {
        return Err(invalid(format!("partial set is not orthonormal (error {err:.3e})")));
    }
    if !(zero_tol > 0.0) {
        return Err(invalid(format!("zero_tol must be positive, got {zero_tol}")));
    }

    let mut vectors = partial.to_vec();
    for axis in 0..d {
        if vectors.len() == d {
            break;
        }
        let mut r = unit_vector(d, axis);
        orthogonalize_against(&mut r, &vectors);
        let n = norm(&r);
        if n >= zero_tol {
            vectors.push(scale(&r, 1.0 / n));
        }
    }
    debug_assert_eq!(vectors.len(), d);
    Ok(OrthonormalBasis {
        vectors,
        semantic_rank: partial.len(),
    })
}

/// Orthogonal projection of `v` onto the span of an orthonormal list.
pub fn project_onto_span(v: &[f64], basis: &[Vector]) -> Result<Vector> {
    if let Some(bad) = basis.iter().position(|q| q.len() != v.len()) {
        return Err(invalid(format!(
            "basis vector {bad} has dimension {} but v has {}",
            basis[bad].len(),
            v.len()
        )));
    }
    let err = orthonormality_error(basis);
    if err > ORTHONORMAL_INPUT_TOL {
        return Err(invalid(format!("basis is not orthonormal (error {err:.3e})")));
    }
    Ok(project_unchecked(v, basis))
}

pub(crate) fn project_unchecked(v: &[f64], basis: &[Vector]) -> Vector {
    let mut out = vec![0.0; v.len()];
    for q in basis {
        axpy(dot(v, q), q, &mut out);
    }
    out
}
