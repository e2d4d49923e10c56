//! Small dense-matrix helpers: row-major storage, dot products, Gram
//! accumulation, and a Cholesky solve for symmetric positive-definite
//! systems. Sized for desk-scale problems (a few thousand columns).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds from a flat row-major buffer; `data.len()` must be `rows*cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::invalid("ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// `self^T * v` for `v` of length `rows`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, row) in self.iter_rows().enumerate() {
            axpy(v[r], row, &mut out);
        }
        out
    }

    /// `self * v` for `v` of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.iter_rows().map(|row| dot(row, v)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

/// Accumulates `X^T X` (p x p, symmetric) and `X^T y` from rows of `x`.
pub fn gram(x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let p = x.cols();
    let mut a = Matrix::zeros(p, p);
    let mut b = vec![0.0; p];
    for (r, row) in x.iter_rows().enumerate() {
        for i in 0..p {
            let xi = row[i];
            if xi != 0.0 {
                // upper triangle only
                let dst = &mut a.as_mut_slice()[i * p..(i + 1) * p];
                for j in i..p {
                    dst[j] += xi * row[j];
                }
            }
        }
        axpy(y[r], row, &mut b);
    }
    // mirror to lower triangle
    for i in 0..p {
        for j in 0..i {
            let v = a.get(j, i);
            a.set(i, j, v);
        }
    }
    (a, b)
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
///
/// Fails with [`Error::RankDeficient`] when a pivot drops below
/// `1e-12 * max_diagonal`, naming the offending column.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::invalid("solve_spd: shape mismatch"));
    }
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(1e-300);

    // lower-triangular factor, row-major
    let mut l = a.clone();
    for j in 0..n {
        let mut d = l.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            d -= v * v;
        }
        if !(d > tol) {
            return Err(Error::RankDeficient { index: j });
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = l.get(i, j);
            // s -= dot(L[i, ..j], L[j, ..j])
            let (ri, rj) = (i * n, j * n);
            let li = &l.as_slice()[ri..ri + j];
            let lj = &l.as_slice()[rj..rj + j];
            s -= dot(li, lj);
            l.set(i, j, s / d);
        }
    }

    // forward solve L z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let li = &l.as_slice()[i * n..i * n + i];
        z[i] = (b[i] - dot(li, &z[..i])) / l.get(i, i);
    }
    // back solve L^T x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

/// Mean and population variance of a slice (variance 0 for singletons).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}
