//! Dense column-major storage and the handful of vector kernels the solver
//! spends its time in.

use nalgebra::{DMatrix, SymmetricEigen};

/// Dense `nrows x ncols` matrix stored column by column, so that a single
/// predictor is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Build from column-major data. Panics if the length is wrong.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "column-major buffer has wrong length");
        Matrix { nrows, ncols, data }
    }

    /// Build from a slice of equally long rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.data[j * nrows + i] = v;
            }
        }
        m
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            assert_eq!(c.len(), nrows, "column has wrong length");
            data.extend_from_slice(c);
        }
        Matrix {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    /// Matrix restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            let src = self.col(j);
            let dst = out.col_mut(j);
            for (d, &i) in dst.iter_mut().zip(rows) {
                *d = src[i];
            }
        }
        out
    }

    /// `X * beta` (no intercept).
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(b, self.col(j), &mut out);
            }
        }
        out
    }

    /// Gram matrix `X_S' X_S / n` of the listed columns.
    pub fn gram(&self, cols: &[usize]) -> DMatrix<f64> {
        let k = cols.len();
        let n = self.nrows as f64;
        let mut g = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = dot(self.col(cols[a]), self.col(cols[b])) / n;
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }
}

/// Inner product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Smallest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Dense eigensolve up to `exact_limit` rows; above that, inverse power
/// iteration on a Cholesky factor (returning 0 when the factorization fails,
/// i.e. the matrix is numerically singular).
pub fn min_eigenvalue(g: &DMatrix<f64>, exact_limit: usize) -> f64 {
    let k = g.nrows();
    if k == 0 {
        return f64::INFINITY;
    }
    if k <= exact_limit {
        let eig = SymmetricEigen::new(g.clone());
        return eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    }
    let Some(chol) = g.clone().cholesky() else {
        return 0.0;
    };
    let mut v = nalgebra::DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut mu = 0.0;
    for _ in 0..50 {
        let w = chol.solve(&v);
        let nw = w.norm();
        if nw == 0.0 || !nw.is_finite() {
            return 0.0;
        }
        let next = w / nw;
        let new_mu = 1.0 / nw;
        let done = (new_mu - mu).abs() <= 1e-10 * new_mu.abs().max(1e-300);
        v = next;
        mu = new_mu;
        if done {
            break;
        }
    }
    mu.max(0.0)
}
