//! Small dense linear algebra: row-major matrices, Cholesky factorization,
//! cyclic Jacobi eigendecomposition and a rank-revealing least-squares solver.
//!
//! The problem sizes in this crate are tiny (basis dimension ~23, design
//! widths ~8), so straightforward dense routines are both fast enough and
//! easy to verify against independent oracles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
#[cfg(not(feature = "std"))]
use crate::math::F64Math;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CoreError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(CoreError::shape("rows have unequal lengths"));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Mat { nrows, ncols, data })
    }

    /// Build from a flat row-major buffer.
    pub fn from_vec(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self, CoreError> {
        if data.len() != nrows * ncols {
            return Err(CoreError::shape(format!(
                "buffer length {} != {}x{}",
                data.len(),
                nrows,
                ncols
            )));
        }
        Ok(Mat { nrows, ncols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// `self^T * v` for a column vector `v` of length `nrows`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let row = self.row(i);
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    /// `self * other`.
    pub fn mul_mat(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.ncols, other.nrows);
        let mut out = Mat::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Symmetric product `self^T * self`.
    pub fn xtx(&self) -> Mat {
        let mut out = Mat::zeros(self.ncols, self.ncols);
        for i in 0..self.nrows {
            let row = self.row(i);
            for j in 0..self.ncols {
                let a = row[j];
                if a == 0.0 {
                    continue;
                }
                for k in j..self.ncols {
                    out[(j, k)] += a * row[k];
                }
            }
        }
        for j in 0..self.ncols {
            for k in 0..j {
                out[(j, k)] = out[(k, j)];
            }
        }
        out
    }

    /// `self + scale * other`, in place.
    pub fn add_scaled(&mut self, other: &Mat, scale: f64) {
        debug_assert_eq!(self.nrows, other.nrows);
        debug_assert_eq!(self.ncols, other.ncols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    /// Factor `a = L L^T`. Fails if `a` is not (numerically) positive definite.
    pub fn new(a: &Mat) -> Result<Self, CoreError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(CoreError::shape("cholesky needs a square matrix"));
        }
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(CoreError::rank(format!(
                            "matrix not positive definite at pivot {i} (value {sum:.3e})"
                        )));
                    }
                    l[(i, j)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let mut sum = x[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n {
                sum -= self.l[(k, i)] * x[k];
            }
            x[i] = sum / self.l[(i, i)];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let mut out = Mat::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col = b.col(j);
            let x = self.solve_vec(&col);
            for i in 0..b.nrows() {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// Dense inverse `A^{-1}`.
    pub fn inverse(&self) -> Mat {
        self.solve_mat(&Mat::identity(self.dim()))
    }

    /// `y^T A^{-1} y` without forming the inverse.
    pub fn quad_inv(&self, y: &[f64]) -> f64 {
        let x = self.solve_vec(y);
        dot(&x, y)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn sym_eigen(a: &Mat) -> Result<(Vec<f64>, Mat), CoreError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::shape("sym_eigen needs a square matrix"));
    }
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let scale = m.max_abs().max(1e-300);
    let tol = 1e-14 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vecs[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok((sorted_vals, sorted_vecs))
}

/// Ordinary least squares with rank-revealing column dropping.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficients, zero for dropped columns.
    pub coefs: Vec<f64>,
    /// Which columns survived the collinearity screen.
    pub kept: Vec<bool>,
    /// Fitted values.
    pub fitted: Vec<f64>,
    /// Residual sum of squares.
    pub sse: f64,
    /// Diagonal of `(X^T X)^{-1}` restricted to kept columns (NaN for dropped).
    pub xtx_inv_diag: Vec<f64>,
    /// Numerical rank (number of kept columns).
    pub rank: usize,
}

/// Least squares `min ||y - X b||` via modified Gram-Schmidt QR.
///
/// A column whose residual (after projecting out previously accepted columns)
/// has norm below `drop_tol` times its original norm is treated as collinear:
/// its coefficient is fixed at zero and it is excluded from the fit.
pub fn ols(x: &Mat, y: &[f64], drop_tol: f64) -> Result<OlsFit, CoreError> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(CoreError::shape(format!(
            "response length {} != design rows {}",
            y.len(),
            n
        )));
    }
    let mut q: Vec<Vec<f64>> = Vec::new(); // orthonormal columns
    let mut r_rows: Vec<Vec<f64>> = Vec::new(); // rows of R (per kept column)
    let mut kept = vec![false; p];
    let mut kept_idx: Vec<usize> = Vec::new();

    for j in 0..p {
        let mut col = x.col(j);
        let orig_norm = dot(&col, &col).sqrt();
        if orig_norm == 0.0 {
            continue; // zero column: dropped
        }
        let mut rj = vec![0.0; q.len()];
        // two MGS passes for stability
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let proj = dot(qk, &col);
                rj[k] += proj;
                for (c, qv) in col.iter_mut().zip(qk) {
                    *c -= proj * qv;
                }
            }
        }
        let res_norm = dot(&col, &col).sqrt();
        if res_norm <= drop_tol * orig_norm {
            continue; // collinear: dropped
        }
        for c in col.iter_mut() {
            *c /= res_norm;
        }
        rj.push(res_norm);
        q.push(col);
        r_rows.push(rj);
        kept[j] = true;
        kept_idx.push(j);
    }

    let rank = q.len();
    // qty = Q^T y
    let qty: Vec<f64> = q.iter().map(|qk| dot(qk, y)).collect();
    // back-substitute R b = qty   (R is upper triangular: r_rows[k][..=k])
    let mut b_kept = vec![0.0; rank];
    for k in (0..rank).rev() {
        let mut sum = qty[k];
        for m in k + 1..rank {
            sum -= r_rows[m][k] * b_kept[m];
        }
        b_kept[k] = sum / r_rows[k][k];
    }
    // (X^T X)^{-1} diag = row norms of R^{-1}: solve R^T u = e_j is equivalent
    // to computing columns of R^{-1}; diag_j = sum_k (R^{-1})_{j k}^2.
    // Invert the small upper-triangular R.
    let mut rinv = Mat::zeros(rank, rank);
    for jcol in 0..rank {
        let mut e = vec![0.0; rank];
        e[jcol] = 1.0;
        for k in (0..rank).rev() {
            let mut sum = e[k];
            for m in k + 1..rank {
                sum -= r_rows[m][k] * rinv[(m, jcol)];
            }
            rinv[(k, jcol)] = sum / r_rows[k][k];
        }
        let _ = e;
    }
    let mut coefs = vec![0.0; p];
    let mut xtx_inv_diag = vec![f64::NAN; p];
    for (k, &j) in kept_idx.iter().enumerate() {
        coefs[j] = b_kept[k];
        let mut d = 0.0;
        for m in 0..rank {
            d += rinv[(k, m)] * rinv[(k, m)];
        }
        xtx_inv_diag[j] = d;
    }
    let fitted = x.mul_vec(&coefs);
    let sse = y
        .iter()
        .zip(&fitted)
        .map(|(yi, fi)| (yi - fi) * (yi - fi))
        .sum();
    Ok(OlsFit {
        coefs,
        kept,
        fitted,
        sse,
        xtx_inv_diag,
        rank,
    })
}
