use crate::error::{Error, Result};
use crate::par;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix2D {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix2D::new",
                format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Matrix2D { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix2D { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix2D::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::dims(
                    "Matrix2D::from_rows",
                    format!("row {r} has {} entries, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix2D { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of `count` rows starting at `start`.
    pub fn row_block(&self, start: usize, count: usize) -> &[f64] {
        &self.data[start * self.cols..(start + count) * self.cols]
    }

    pub fn transpose(&self) -> Matrix2D {
        let mut out = Matrix2D::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix2D) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims("axpy", format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }
}

/// `A · B`. Each output row is accumulated over the inner index in
/// ascending order, independently of every other row.
pub fn matmul(a: &Matrix2D, b: &Matrix2D) -> Result<Matrix2D> {
    if a.cols != b.rows {
        return Err(Error::dims("matmul", format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    let mut out = Matrix2D::zeros(a.rows, b.cols);
    matmul_rows_into(&a.data, a.cols, b, &mut out.data);
    Ok(out)
}

/// Row-wise product of a flat `(n x inner)` buffer with `b`, written to `out`.
pub(crate) fn matmul_rows_into(a: &[f64], inner: usize, b: &Matrix2D, out: &mut [f64]) {
    debug_assert_eq!(inner, b.rows);
    let cols = b.cols;
    par::for_each_row(out, cols, |r, out_row| {
        out_row.iter_mut().for_each(|v| *v = 0.0);
        let a_row = &a[r * inner..(r + 1) * inner];
        for (k, &x) in a_row.iter().enumerate() {
            if x != 0.0 {
                axpy(x, b.row(k), out_row);
            }
        }
    });
}

/// Row-wise product of a flat `(n x b.cols)` buffer with `bᵀ`.
pub(crate) fn matmul_rows_transposed_into(a: &[f64], b: &Matrix2D, out: &mut [f64]) {
    let inner = b.cols;
    let cols = b.rows;
    par::for_each_row(out, cols, |r, out_row| {
        let a_row = &a[r * inner..(r + 1) * inner];
        for (c, v) in out_row.iter_mut().enumerate() {
            *v = dot(a_row, b.row(c));
        }
    });
}

/// Σ_jk A_jk B_jk.
pub fn frobenius_dot(a: &Matrix2D, b: &Matrix2D) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dims("frobenius_dot", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(dot(&a.data, &b.data))
}

/// Dot product with four interleaved partial sums, combined in a fixed
/// order. Deterministic for a given length.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            lanes[k] += x[k] * y[k];
        }
    }
    let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (x, y) in ra.iter().zip(rb) {
        acc += x * y;
    }
    acc
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
