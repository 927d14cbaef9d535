//! Dense row-major matrices and a Cholesky solver for the small symmetric
//! systems every trainer reduces to.
//!
//! Explicit inverses are never formed. When a system matrix turns out to be
//! singular or indefinite, the solve is retried on `M + λI` with
//! `λ = 1e-8 · trace(M) / dim` and the result is marked as regularized.

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`solve_spd`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Ridge magnitude relative to the mean diagonal entry.
pub const RIDGE_SCALE: f64 = 1e-8;

/// Cholesky pivots below this fraction of the largest diagonal entry are
/// treated as zero.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting shape mismatches and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix of shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Argument(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero, and a zero-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Argument(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    /// `Xᵀ diag(weights) X`, or `XᵀX` when `weights` is `None`.
    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for (k, r) in self.row_iter().enumerate() {
            let s = weights.map_or(1.0, |w| w[k]);
            for i in 0..n {
                let si = s * r[i];
                if si == 0.0 {
                    continue;
                }
                for j in i..n {
                    g.data[i * n + j] += si * r[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.data[i * n + j] = g.data[j * n + i];
            }
        }
        g
    }

    /// `Xᵀ diag(weights) e`, i.e. the weighted column sums.
    pub fn weighted_column_sums(&self, weights: Option<&[f64]>) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (k, r) in self.row_iter().enumerate() {
            let s = weights.map_or(1.0, |w| w[k]);
            for (o, x) in out.iter_mut().zip(r) {
                *o += s * x;
            }
        }
        out
    }

    /// Entrywise sum `self + scale · other`.
    pub fn add_scaled(&self, other: &Matrix, scale: f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Argument(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows and columns both restricted to `idx`.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            data.extend(idx.iter().map(|&j| self[(i, j)]));
        }
        Matrix {
            rows: idx.len(),
            cols: idx.len(),
            data,
        }
    }

    /// Keeps the rows selected by `keep`, in order.
    pub fn select_rows(&self, keep: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(keep.len() * self.cols);
        for &i in keep {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: keep.len(),
            cols: self.cols,
            data,
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `[A | e]`: `a` with a trailing column of ones.
pub fn augment_with_ones(a: &Matrix) -> Result<Matrix> {
    if a.is_empty() {
        return Err(Error::Argument(
            "cannot augment an empty matrix".to_string(),
        ));
    }
    let cols = a.cols + 1;
    let mut data = Vec::with_capacity(a.rows * cols);
    for r in a.row_iter() {
        data.extend_from_slice(r);
        data.push(1.0);
    }
    Ok(Matrix {
        rows: a.rows,
        cols,
        data,
    })
}

/// Solution of a symmetric system together with whether the ridge fallback
/// was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    pub regularized: bool,
}

/// Solves `M x = v` for symmetric positive (semi)definite `M`.
pub fn solve_spd(m: &Matrix, v: &[f64]) -> Result<SpdSolution> {
    let n = m.rows;
    if m.cols != n {
        return Err(Error::Argument(format!(
            "system matrix must be square, got {}x{}",
            m.rows, m.cols
        )));
    }
    if v.len() != n {
        return Err(Error::Argument(format!(
            "right-hand side has length {}, system has dimension {n}",
            v.len()
        )));
    }
    if m.data.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::Argument(
            "non-finite entry in linear system".to_string(),
        ));
    }
    let scale = m.data.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Argument(format!(
                    "system matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    if n == 0 {
        return Ok(SpdSolution {
            x: Vec::new(),
            regularized: false,
        });
    }

    if let Some(l) = cholesky(m, 0.0) {
        return Ok(SpdSolution {
            x: cholesky_solve(&l, n, v),
            regularized: false,
        });
    }

    let mut ridge = RIDGE_SCALE * m.trace() / n as f64;
    if !(ridge > 0.0) {
        ridge = RIDGE_SCALE * scale.max(1.0);
    }
    match cholesky(m, ridge) {
        Some(l) => Ok(SpdSolution {
            x: cholesky_solve(&l, n, v),
            regularized: true,
        }),
        None => Err(Error::Numerical(
            "system matrix is indefinite even after ridge regularization".to_string(),
        )),
    }
}

/// Lower Cholesky factor of `m + shift·I`, or `None` when a pivot falls
/// below tolerance.
fn cholesky(m: &Matrix, shift: f64) -> Option<Vec<f64>> {
    let n = m.rows;
    let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max((m[(i, i)] + shift).abs()));
    let floor = PIVOT_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut pivot = m[(j, j)] + shift;
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if !(pivot > floor) {
            return None;
        }
        let ljj = pivot.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    let mut y = v.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}
