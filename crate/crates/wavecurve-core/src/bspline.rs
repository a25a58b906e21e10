//! B-spline basis systems on clamped knot vectors.
//!
//! A basis is defined by a polynomial degree and a strictly increasing
//! breakpoint sequence (endpoints included). The knot vector repeats each
//! endpoint `degree + 1` times, so the basis spans all splines of the given
//! degree with the given interior breakpoints and the number of basis
//! functions is `n_breakpoints + degree - 1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::grid::Grid;
use crate::linalg::Mat;
#[cfg(not(feature = "std"))]
use crate::math::F64Math;

/// Slack for domain membership tests, relative to the span.
const DOMAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    degree: usize,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
}

impl BasisSystem {
    pub fn new(degree: usize, breakpoints: Vec<f64>) -> Result<Self, CoreError> {
        if degree == 0 || degree > 10 {
            return Err(CoreError::input(format!(
                "degree must be in 1..=10, got {degree}"
            )));
        }
        if breakpoints.len() < 2 {
            return Err(CoreError::input("need at least 2 breakpoints"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::input("breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(CoreError::input("breakpoints must be finite"));
        }
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * degree);
        let first = breakpoints[0];
        let last = *breakpoints.last().unwrap();
        for _ in 0..degree {
            knots.push(first);
        }
        knots.extend_from_slice(&breakpoints);
        for _ in 0..degree {
            knots.push(last);
        }
        Ok(BasisSystem {
            degree,
            breakpoints,
            knots,
        })
    }

    /// Cubic basis with `n_breakpoints` equally spaced breakpoints on
    /// `[0, span]`, endpoints included.
    pub fn cubic(span: f64, n_breakpoints: usize) -> Result<Self, CoreError> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(CoreError::input(format!("span must be positive, got {span}")));
        }
        if n_breakpoints < 2 {
            return Err(CoreError::input("need at least 2 breakpoints"));
        }
        let step = span / (n_breakpoints - 1) as f64;
        let mut breaks: Vec<f64> = (0..n_breakpoints).map(|i| i as f64 * step).collect();
        // force the exact endpoint despite rounding in the step arithmetic
        *breaks.last_mut().unwrap() = span;
        BasisSystem::new(3, breaks)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.breakpoints.len() + self.degree - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Greville abscissae: knot averages at which coefficient `c_i = a + b t_i`
    /// reproduces the affine function `a + b t` exactly.
    pub fn greville_abscissae(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.n_basis())
            .map(|i| {
                let mut s = 0.0;
                for k in 1..=p {
                    s += self.knots[i + k];
                }
                s / p as f64
            })
            .collect()
    }

    fn check_domain(&self, t: f64) -> Result<f64, CoreError> {
        let (lo, hi) = self.domain();
        let slack = DOMAIN_EPS * (hi - lo);
        if !t.is_finite() || t < lo - slack || t > hi + slack {
            return Err(CoreError::Domain { point: t, lo, hi });
        }
        Ok(t.clamp(lo, hi))
    }

    /// Index of the knot span containing `t`, restricted to nonempty spans.
    fn find_span(&self, t: f64) -> usize {
        let k = &self.knots;
        let p = self.degree;
        let n = self.n_basis();
        if t >= k[n] {
            return n - 1;
        }
        if t <= k[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n - 1);
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if k[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Triangular table of basis values: `tab[q][i] = N_{i,q}(t)` for all i.
    fn value_table(&self, t: f64) -> Vec<Vec<f64>> {
        let k = &self.knots;
        let p = self.degree;
        let span = self.find_span(t);
        let mut tab: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
        let mut row0 = vec![0.0; k.len() - 1];
        row0[span] = 1.0;
        tab.push(row0);
        for q in 1..=p {
            let prev = &tab[q - 1];
            let mut row = vec![0.0; k.len() - 1 - q];
            for i in 0..row.len() {
                let mut v = 0.0;
                let d1 = k[i + q] - k[i];
                if d1 > 0.0 {
                    v += (t - k[i]) / d1 * prev[i];
                }
                let d2 = k[i + q + 1] - k[i + 1];
                if d2 > 0.0 {
                    v += (k[i + q + 1] - t) / d2 * prev[i + 1];
                }
                row[i] = v;
            }
            tab.push(row);
        }
        tab
    }

    /// Derivative of a degree-`q` row given the degree-`q-1` row.
    fn deriv_row(&self, q: usize, lower: &[f64]) -> Vec<f64> {
        let k = &self.knots;
        let mut row = vec![0.0; lower.len() - 1];
        for i in 0..row.len() {
            let mut v = 0.0;
            let d1 = k[i + q] - k[i];
            if d1 > 0.0 {
                v += lower[i] / d1;
            }
            let d2 = k[i + q + 1] - k[i + 1];
            if d2 > 0.0 {
                v -= lower[i + 1] / d2;
            }
            row[i] = q as f64 * v;
        }
        row
    }

    /// Values of all basis functions at `t`.
    pub fn eval_row(&self, t: f64) -> Result<Vec<f64>, CoreError> {
        let t = self.check_domain(t)?;
        let tab = self.value_table(t);
        Ok(tab[self.degree].clone())
    }

    /// Values, first and second derivatives of all basis functions at `t`.
    pub fn eval_row_derivs(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CoreError> {
        let t = self.check_domain(t)?;
        let p = self.degree;
        let tab = self.value_table(t);
        let values = tab[p].clone();
        let d1 = if p >= 1 {
            self.deriv_row(p, &tab[p - 1])
        } else {
            vec![0.0; self.n_basis()]
        };
        let d2 = if p >= 2 {
            let lower_d1 = self.deriv_row(p - 1, &tab[p - 2]);
            self.deriv_row(p, &lower_d1)
        } else {
            vec![0.0; self.n_basis()]
        };
        Ok((values, d1, d2))
    }

    /// Row-per-point evaluation matrix `B[i][j] = N_j(grid_i)`.
    pub fn eval_matrix(&self, grid: &Grid) -> Result<Mat, CoreError> {
        let mut m = Mat::zeros(grid.len(), self.n_basis());
        for (i, &t) in grid.points().iter().enumerate() {
            let row = self.eval_row(t)?;
            m.row_mut(i).copy_from_slice(&row);
        }
        Ok(m)
    }

    /// Evaluate the spline with coefficients `coefs` at `t`.
    pub fn eval(&self, coefs: &[f64], t: f64) -> Result<f64, CoreError> {
        if coefs.len() != self.n_basis() {
            return Err(CoreError::shape(format!(
                "coefficient length {} != basis size {}",
                coefs.len(),
                self.n_basis()
            )));
        }
        let row = self.eval_row(t)?;
        Ok(crate::linalg::dot(&row, coefs))
    }

    /// Accumulate `sum_spans sum_nodes w * f_i * f_j` into a symmetric matrix,
    /// where `f` is the row produced by `pick` at each quadrature node.
    fn quad_outer<F>(&self, mut pick: F) -> Mat
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        // 4-point Gauss-Legendre: exact through polynomial degree 7, enough
        // for products of two cubics (degree 6) on each span.
        let r1 = (3.0 - 2.0 * (6.0_f64 / 5.0).sqrt()) / 7.0;
        let r2 = (3.0 + 2.0 * (6.0_f64 / 5.0).sqrt()) / 7.0;
        let nodes = [-r2.sqrt(), -r1.sqrt(), r1.sqrt(), r2.sqrt()];
        let w30 = 30.0_f64.sqrt();
        let weights = [
            (18.0 - w30) / 36.0,
            (18.0 + w30) / 36.0,
            (18.0 + w30) / 36.0,
            (18.0 - w30) / 36.0,
        ];
        let nb = self.n_basis();
        let mut out = Mat::zeros(nb, nb);
        for w in self.breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (node, wt) in nodes.iter().zip(&weights) {
                let t = mid + half * node;
                let row = pick(t);
                let scale = wt * half;
                for i in 0..nb {
                    let ri = row[i];
                    if ri == 0.0 {
                        continue;
                    }
                    for j in i..nb {
                        out[(i, j)] += scale * ri * row[j];
                    }
                }
            }
        }
        for i in 0..nb {
            for j in 0..i {
                out[(i, j)] = out[(j, i)];
            }
        }
        out
    }

    /// Second-derivative penalty matrix `P[i][j] = int N_i'' N_j'' dt`,
    /// computed exactly by per-span Gauss quadrature.
    pub fn pen2(&self) -> Mat {
        self.quad_outer(|t| {
            let (_, _, d2) = self.eval_row_derivs(t).expect("node inside domain");
            d2
        })
    }

    /// Gram matrix `G[i][j] = int N_i N_j dt`, exact per-span quadrature.
    pub fn gram(&self) -> Mat {
        self.quad_outer(|t| self.eval_row(t).expect("node inside domain"))
    }
}
