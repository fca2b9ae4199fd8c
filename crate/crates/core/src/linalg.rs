//! Small dense matrices.
//!
//! Everything the bound computations touch is at most 8×8, so storage is a
//! plain row-major `Vec<f64>` and algorithms favour robustness over speed:
//! eigenvalues come from cyclic Jacobi rotations and inverses from
//! Gauss-Jordan elimination behind an eigenvalue-based singularity test.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Plain real vector (points, scores, estimation errors, normals).
pub type Vector = Vec<f64>;

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Matrices whose smallest-to-largest eigenvalue magnitude ratio falls below
/// this are treated as singular by [`invert`].
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular (reciprocal condition {rcond:.3e} below {threshold:.0e})")]
    SingularMatrix { rcond: f64, threshold: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("unsupported dimension {0} (expected 1..={MAX_DIM})")]
    InvalidDim(usize),
    #[error("expected {expected} entries, got {got}")]
    EntryCount { expected: usize, got: usize },
}

/// Dense symmetric matrix. Symmetry is exact: construction averages the
/// `(i, j)` and `(j, i)` entries and every operation preserves it.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

fn check_dim(dim: usize) -> Result<(), LinalgError> {
    if dim == 0 || dim > MAX_DIM {
        Err(LinalgError::InvalidDim(dim))
    } else {
        Ok(())
    }
}

impl SymMatrix {
    /// Builds from row-major entries, symmetrizing as it goes.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(LinalgError::EntryCount {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Ok(Self::from_fn(dim, |i, j| {
            0.5 * (entries[i * dim + j] + entries[j * dim + i])
        }))
    }

    /// Builds from a closure evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "unsupported dimension {dim}");
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| 0.0)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { scale } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major view of all `dim²` entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vector {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self, LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// `lᵀ · self · l`, symmetrized. `l` must have `self.dim()` rows.
    pub fn congruence(&self, l: &Matrix) -> Result<Self, LinalgError> {
        if l.rows() != self.dim {
            return Err(LinalgError::DimMismatch {
                left: self.dim,
                right: l.rows(),
            });
        }
        let product = l.transpose().mul(&Matrix::from(self))?.mul(l)?;
        Ok(product.symmetrize())
    }

    /// Relative Frobenius distance `‖self − other‖ / ‖other‖` (absolute when
    /// `other` is zero).
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let diff = (self - other).frobenius_norm();
        let scale = other.frobenius_norm();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Returns `λ` when the matrix equals `λ·I` within `tol` (absolute,
    /// entrywise).
    pub fn as_scaled_identity(&self, tol: f64) -> Option<f64> {
        let lambda = self.trace() / self.dim as f64;
        let close = (0..self.dim).all(|i| {
            (0..self.dim).all(|j| {
                let target = if i == j { lambda } else { 0.0 };
                (self.get(i, j) - target).abs() <= tol
            })
        });
        close.then_some(lambda)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vector {
        self.eigen().0
    }

    /// Eigen-decomposition `(values, vectors)` with values ascending and
    /// `vectors` holding the matching eigenvectors as columns.
    pub fn eigen(&self) -> (Vector, Matrix) {
        let (values, vectors) = jacobi_eigen(self);
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_values = order.iter().map(|&k| values[k]).collect();
        let sorted_vectors = Matrix::from_fn(self.dim, self.dim, |i, j| vectors.get(i, order[j]));
        (sorted_values, sorted_vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()[self.dim - 1]
    }

    pub fn determinant(&self) -> f64 {
        Matrix::from(self).determinant()
    }

    pub fn invert(&self) -> Result<Self, LinalgError> {
        invert_with_rcond(self, SINGULAR_RCOND)
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.dim).map(|i| &self.entries[i * self.dim..(i + 1) * self.dim]))
            .finish()
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Matrix::from(self).fmt(f)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    /// Panics on dimension mismatch; see [`SymMatrix::checked_add`].
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.checked_add(rhs).expect("SymMatrix dimension mismatch")
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    /// Panics on dimension mismatch; see [`SymMatrix::checked_sub`].
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.checked_sub(rhs).expect("SymMatrix dimension mismatch")
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Cyclic Jacobi. Returns unsorted eigenvalues and the accumulated rotation
/// (eigenvectors as columns).
fn jacobi_eigen(m: &SymMatrix) -> (Vector, Matrix) {
    const MAX_SWEEPS: usize = 64;
    let n = m.dim;
    let mut a = Matrix::from(m);
    let mut v = Matrix::identity(n);
    let total: f64 = m.entries.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return (vec![0.0; n], v);
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off <= 1e-34 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A ← Jᵀ A J with J the (p, q) plane rotation.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

/// Inverse of a symmetric matrix.
///
/// Fails with [`LinalgError::SingularMatrix`] when the smallest eigenvalue
/// magnitude is below `rcond` times the largest.
pub fn invert(m: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    invert_with_rcond(m, SINGULAR_RCOND)
}

pub fn invert_with_rcond(m: &SymMatrix, rcond: f64) -> Result<SymMatrix, LinalgError> {
    let eig = m.eigenvalues();
    let largest = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let smallest = eig.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    if ratio.is_nan() || ratio < rcond {
        return Err(LinalgError::SingularMatrix {
            rcond: ratio,
            threshold: rcond,
        });
    }
    let inverse = Matrix::from(m)
        .gauss_jordan_inverse()
        .ok_or(LinalgError::SingularMatrix {
            rcond: ratio,
            threshold: rcond,
        })?;
    Ok(inverse.symmetrize())
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    m.min_eigenvalue()
}

/// Loewner order test: `a ⪰ b` iff `a − b` is positive semidefinite, here
/// relaxed to `λ_min(a − b) ≥ −tol`.
pub fn loewner_geq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool, LinalgError> {
    Ok(a.checked_sub(b)?.min_eigenvalue() >= -tol)
}

/// General dense row-major matrix (observation matrices, velocity
/// Jacobians, Leibniz terms).
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::EntryCount {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimMismatch {
                left: self.cols,
                right: rhs.rows,
            });
        }
        Ok(Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * rhs.get(k, j)).sum()
        }))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        assert_eq!(v.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|k| self.get(i, k) * v[k]).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn checked_sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimMismatch {
                left: self.rows * self.cols,
                right: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(A + Aᵀ)/2`. Panics unless square.
    pub fn symmetrize(&self) -> SymMatrix {
        assert_eq!(self.rows, self.cols, "symmetrize needs a square matrix");
        SymMatrix::from_fn(self.rows, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// Largest entrywise gap between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Determinant by partial-pivot elimination. Panics unless square.
    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a.get(r, col).abs().total_cmp(&a.get(s, col).abs()))
                .unwrap();
            if a.get(pivot, col) == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                det = -det;
            }
            let p = a.get(col, col);
            det *= p;
            for r in (col + 1)..n {
                let factor = a.get(r, col) / p;
                for c in col..n {
                    let v = a.get(r, c) - factor * a.get(col, c);
                    a.set(r, c, v);
                }
            }
        }
        det
    }

    /// Rank-revealing helper: rank via singular values of `AᵀA`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let gram = self
            .transpose()
            .mul(self)
            .expect("AᵀA is always conformable")
            .symmetrize();
        let eig = gram.eigenvalues();
        let largest = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if largest == 0.0 {
            return 0;
        }
        eig.iter().filter(|v| v.abs() > rel_tol * rel_tol * largest).count()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn gauss_jordan_inverse(&self) -> Option<Matrix> {
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a.get(r, col).abs().total_cmp(&a.get(s, col).abs()))?;
            if a.get(pivot, col) == 0.0 {
                return None;
            }
            a.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
            let p = a.get(col, col);
            for c in 0..n {
                a.set(col, c, a.get(col, c) / p);
                inv.set(col, c, inv.get(col, c) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a.set(r, c, a.get(r, c) - factor * a.get(col, c));
                    inv.set(r, c, inv.get(r, c) - factor * inv.get(col, c));
                }
            }
        }
        Some(inv)
    }
}

impl From<&SymMatrix> for Matrix {
    fn from(m: &SymMatrix) -> Self {
        Matrix {
            rows: m.dim,
            cols: m.dim,
            data: m.entries.clone(),
        }
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| &self.data[i * self.cols..(i + 1) * self.cols]))
            .finish()
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6e}", self.get(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
