//! Dense row-major `f64` matrix with deterministic kernels.
//!
//! The kernels are plain loops on purpose. Every reduction runs left to
//! right within a row, so two runs of the same program produce bit-identical
//! results and a naive reference implementation can be compared against
//! them exactly. BLAS-level speed is a non-goal.

use serde::{Deserialize, Serialize};

/// Row-major dense matrix of 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major buffer. Panics if the length is not
    /// `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match shape {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `y = self * x`. Each output entry is a left-to-right sum over one row.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.cols,
            "matvec: matrix {}x{} incompatible with vector of length {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (m, xc) in row.iter().zip(x) {
                acc += m * xc;
            }
            y[r] = acc;
        }
        y
    }

    /// `y = self^T * x` without materializing the transpose. The sum for each
    /// output entry runs over rows in ascending order.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.rows,
            "matvec_t: matrix {}x{} incompatible with vector of length {}",
            self.rows,
            self.cols,
            x.len()
        );
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (yc, m) in y.iter_mut().zip(row) {
                *yc += m * xr;
            }
        }
        y
    }

    /// `C = self * other`, inner sum left to right.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Rank-one update `self += scale * u v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        assert_eq!(
            (u.len(), v.len()),
            (self.rows, self.cols),
            "add_outer: vectors {}x{} vs matrix {}x{}",
            u.len(),
            v.len(),
            self.rows,
            self.cols
        );
        for (r, &ur) in u.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (m, &vc) in row.iter_mut().zip(v) {
                *m += scale * ur * vc;
            }
        }
    }

    /// `self += alpha * other`, entrywise.
    pub fn add_scaled(&mut self, other: &Matrix, alpha: f64) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "add_scaled: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Multiply every entry by `alpha`.
    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    /// Euclidean norm of column `c`.
    pub fn col_norm(&self, c: usize) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.rows {
            let v = self.get(r, c);
            acc += v * v;
        }
        acc.sqrt()
    }

    /// Multiply column `c` by `alpha`.
    pub fn scale_col(&mut self, c: usize, alpha: f64) {
        for r in 0..self.rows {
            self.data[r * self.cols + c] *= alpha;
        }
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
