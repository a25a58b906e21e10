//! Functional-response elastic net: response curves live on a shared B-spline
//! basis and every coefficient function is penalized through its true L2 norm,
//! computed exactly with the basis Gram matrix. Also the pointwise
//! function-on-scalar marginal fit with its standard-error band.
//!
//! Objective: `1/2 sum_i ||Y_i - sum_j x_ij b_j||^2_L2 + l1 sum_j ||b_j||_L2
//! + (l2/2) sum_j ||b_j||^2_L2`, minimized by block coordinate descent with an
//! exact group-shrinkage update per block.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::bspline::BasisSystem;
use crate::curve::Curve;
use crate::elastic_net::{CvResult, DesignMatrix, StabilitySummary};
use crate::error::CoreError;
use crate::grid::Grid;
use crate::linalg::{dot, Mat};
#[cfg(not(feature = "std"))]
use crate::math::F64Math;
use crate::smoothing::Smoother;

/// L2 norm of a coefficient vector under the Gram metric.
fn gram_norm(v: &[f64], gram: &Mat) -> f64 {
    gram.mul_vec(v)
        .iter()
        .zip(v)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// `max_j ||(X' Y)_j||_L2`: the smallest l1 with an all-zero minimizer.
pub fn fgen_lambda_max(x: &Mat, y_coefs: &Mat, gram: &Mat) -> Result<f64, CoreError> {
    if x.nrows() != y_coefs.nrows() {
        return Err(CoreError::shape("design rows != response curves"));
    }
    if y_coefs.ncols() != gram.nrows() || gram.nrows() != gram.ncols() {
        return Err(CoreError::shape("Gram matrix does not match the basis"));
    }
    let xty = x.transpose().mul_mat(y_coefs);
    let mut worst = 0.0_f64;
    for j in 0..xty.nrows() {
        worst = worst.max(gram_norm(xty.row(j), gram));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct FGenFit {
    /// One basis-coefficient row per feature.
    pub coefs: Mat,
    pub active: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sweeps: usize,
    /// Objective after every sweep.
    pub objective_trace: Vec<f64>,
}

pub fn fgen_objective(x: &Mat, y_coefs: &Mat, gram: &Mat, b: &Mat, l1: f64, l2: f64) -> f64 {
    let n = x.nrows();
    let fitted = x.mul_mat(b);
    let mut loss = 0.0;
    for i in 0..n {
        let r: Vec<f64> = y_coefs
            .row(i)
            .iter()
            .zip(fitted.row(i))
            .map(|(a, f)| a - f)
            .collect();
        let gn = gram_norm(&r, gram);
        loss += gn * gn;
    }
    let mut pen = 0.0;
    for j in 0..b.nrows() {
        let gn = gram_norm(b.row(j), gram);
        pen += l1 * gn + 0.5 * l2 * gn * gn;
    }
    0.5 * loss + pen
}

/// Largest group-KKT violation over inactive blocks: `||(X' R)_j||_L2`
/// may not exceed l1 when `b_j = 0`.
pub fn fgen_inactive_kkt(x: &Mat, y_coefs: &Mat, gram: &Mat, b: &Mat, l1: f64) -> f64 {
    let fitted = x.mul_mat(b);
    let mut resid = y_coefs.clone();
    for i in 0..resid.nrows() {
        for k in 0..resid.ncols() {
            resid[(i, k)] -= fitted[(i, k)];
        }
    }
    let xtr = x.transpose().mul_mat(&resid);
    let mut worst = 0.0_f64;
    for j in 0..b.nrows() {
        if b.row(j).iter().all(|&v| v == 0.0) {
            worst = worst.max((gram_norm(xtr.row(j), gram) - l1).max(0.0));
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct FGenOptions {
    /// Convergence threshold on the relative objective decrease per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: Option<Mat>,
}

impl Default for FGenOptions {
    fn default() -> Self {
        FGenOptions {
            tol: 1e-8,
            max_sweeps: 10_000,
            init: None,
        }
    }
}

/// Block coordinate descent. Each block update is the exact minimizer of the
/// objective in that coefficient row, so inactive rows are exactly zero.
pub fn fgen_fit_with(
    x: &Mat,
    y_coefs: &Mat,
    gram: &Mat,
    l1: f64,
    l2: f64,
    opts: &FGenOptions,
) -> Result<FGenFit, CoreError> {
    let n = x.nrows();
    let p = x.ncols();
    let k = y_coefs.ncols();
    if y_coefs.nrows() != n {
        return Err(CoreError::shape("design rows != response curves"));
    }
    if gram.nrows() != k || gram.ncols() != k {
        return Err(CoreError::shape("Gram matrix does not match the basis"));
    }
    if l1 < 0.0 || l2 < 0.0 || !l1.is_finite() || !l2.is_finite() {
        return Err(CoreError::input("penalties must be finite and nonnegative"));
    }
    let col_sq: Vec<f64> = (0..p)
        .map(|j| {
            let c = x.col(j);
            dot(&c, &c)
        })
        .collect();
    let mut b = match &opts.init {
        Some(m) if m.nrows() == p && m.ncols() == k => m.clone(),
        Some(_) => return Err(CoreError::shape("warm-start shape != p x K")),
        None => Mat::zeros(p, k),
    };
    // residual coefficient matrix R = Y - X B
    let mut resid = {
        let fitted = x.mul_mat(&b);
        let mut r = y_coefs.clone();
        for i in 0..n {
            for c in 0..k {
                r[(i, c)] -= fitted[(i, c)];
            }
        }
        r
    };
    let mut trace = vec![fgen_objective(x, y_coefs, gram, &b, l1, l2)];
    let mut sweeps = 0;
    loop {
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let xj = x.col(j);
            // z = (X' R)_j + s_j b_j
            let mut z = vec![0.0; k];
            for (i, &xv) in xj.iter().enumerate() {
                if xv != 0.0 {
                    for (zc, rv) in z.iter_mut().zip(resid.row(i)) {
                        *zc += xv * rv;
                    }
                }
            }
            for (zc, bv) in z.iter_mut().zip(b.row(j)) {
                *zc += col_sq[j] * bv;
            }
            let zn = gram_norm(&z, gram);
            let scale = if zn > l1 {
                (1.0 - l1 / zn) / (col_sq[j] + l2)
            } else {
                0.0
            };
            let mut changed = false;
            let mut delta = vec![0.0; k];
            for c in 0..k {
                let new = scale * z[c];
                delta[c] = new - b[(j, c)];
                if delta[c] != 0.0 {
                    changed = true;
                    b[(j, c)] = new;
                }
            }
            if changed {
                for (i, &xv) in xj.iter().enumerate() {
                    if xv != 0.0 {
                        for (rv, dc) in resid.row_mut(i).iter_mut().zip(&delta) {
                            *rv -= xv * dc;
                        }
                    }
                }
            }
        }
        sweeps += 1;
        let obj = fgen_objective(x, y_coefs, gram, &b, l1, l2);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() < opts.tol * (1.0 + prev.abs()) {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(CoreError::NoConvergence {
                sweeps,
                gap: prev - obj,
            });
        }
    }
    let active = (0..p)
        .filter(|&j| b.row(j).iter().any(|&v| v != 0.0))
        .collect();
    Ok(FGenFit {
        coefs: b,
        active,
        lambda1: l1,
        lambda2: l2,
        sweeps,
        objective_trace: trace,
    })
}

pub fn fgen_fit(
    x: &Mat,
    y_coefs: &Mat,
    gram: &Mat,
    l1: f64,
    l2: f64,
) -> Result<FGenFit, CoreError> {
    fgen_fit_with(x, y_coefs, gram, l1, l2, &FGenOptions::default())
}

#[derive(Debug, Clone)]
pub struct FGenPath {
    pub lambda1_grid: Vec<f64>,
    /// Same upper-bracket convention as the scalar path.
    pub lambda_ratio: Vec<f64>,
    pub first_entry: Vec<Option<usize>>,
}

pub fn fgen_path_ratios(
    x: &Mat,
    y_coefs: &Mat,
    gram: &Mat,
    grid_size: usize,
    lambda2_ratio: f64,
) -> Result<FGenPath, CoreError> {
    if grid_size < 2 {
        return Err(CoreError::input("path needs at least 2 grid points"));
    }
    let lam_max = fgen_lambda_max(x, y_coefs, gram)?;
    if !(lam_max > 0.0) {
        return Err(CoreError::rank(
            "functional lambda_max = 0: response orthogonal to every column",
        ));
    }
    let grid = crate::elastic_net::path_grid(lam_max, grid_size);
    let p = x.ncols();
    let mut first_entry: Vec<Option<usize>> = vec![None; p];
    let mut warm = Mat::zeros(p, y_coefs.ncols());
    for (i, &l1) in grid.iter().enumerate() {
        let opts = FGenOptions {
            init: Some(warm.clone()),
            ..FGenOptions::default()
        };
        let fit = fgen_fit_with(x, y_coefs, gram, l1, lambda2_ratio * l1, &opts)?;
        warm = fit.coefs.clone();
        for j in 0..p {
            if first_entry[j].is_none() && warm.row(j).iter().any(|&v| v != 0.0) {
                debug_assert!(i >= 1, "nonzero block at lambda_max");
                first_entry[j] = Some(i);
            }
        }
    }
    let lambda_ratio = first_entry
        .iter()
        .map(|e| match e {
            Some(i) => grid[i.saturating_sub(1)] / grid[0],
            None => 0.0,
        })
        .collect();
    Ok(FGenPath {
        lambda1_grid: grid,
        lambda_ratio,
        first_entry,
    })
}

/// Stability resampling for the functional path: subsample units without
/// replacement, re-standardize the design, average the ratios.
#[allow(clippy::too_many_arguments)]
pub fn fgen_stability(
    raw_x: &Mat,
    names: &[String],
    y_coefs: &Mat,
    gram: &Mat,
    runs: usize,
    n_range: (usize, usize),
    grid_size: usize,
    lambda2_ratio: f64,
    master_seed: u64,
) -> Result<StabilitySummary, CoreError> {
    let n = raw_x.nrows();
    let p = raw_x.ncols();
    if y_coefs.nrows() != n {
        return Err(CoreError::shape("design rows != response curves"));
    }
    let (lo, hi) = n_range;
    if lo > hi || hi > n || lo == 0 {
        return Err(CoreError::input("invalid subsample range"));
    }
    let mut sums = vec![0.0; p];
    let mut used = 0;
    let mut skipped = 0;
    for run in 0..runs {
        let mut rng = crate::seed::rng(master_seed, "fgen-stability", run as u64);
        let m = if lo == hi {
            lo
        } else {
            use rand::Rng;
            rng.gen_range(lo..=hi)
        };
        if m < p + 1 {
            skipped += 1;
            continue;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(m);
        let mut sub_x = Mat::zeros(m, p);
        let mut sub_y = Mat::zeros(m, y_coefs.ncols());
        for (r, &i) in idx.iter().enumerate() {
            sub_x.row_mut(r).copy_from_slice(raw_x.row(i));
            sub_y.row_mut(r).copy_from_slice(y_coefs.row(i));
        }
        let design = match DesignMatrix::standardize(&sub_x, names.to_vec()) {
            Ok(d) => d,
            Err(CoreError::Rank(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let path = match fgen_path_ratios(&design.x, &sub_y, gram, grid_size, lambda2_ratio) {
            Ok(p) => p,
            Err(CoreError::Rank(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (s, r) in sums.iter_mut().zip(&path.lambda_ratio) {
            *s += r;
        }
        used += 1;
    }
    if used == 0 {
        return Err(CoreError::input("every stability run was skipped"));
    }
    let mean_ratio = sums.iter().map(|s| s / used as f64).collect();
    Ok(StabilitySummary {
        names: names.to_vec(),
        mean_ratio,
        runs_requested: runs,
        runs_used: used,
        runs_skipped: skipped,
    })
}

/// K-fold cross-validation for the functional path. The response is centered
/// per training split (functional intercept); the held-out error is the
/// integrated squared prediction error.
#[allow(clippy::too_many_arguments)]
pub fn fgen_cv_select(
    raw_x: &Mat,
    names: &[String],
    y_coefs: &Mat,
    gram: &Mat,
    folds: usize,
    grid_size: usize,
    lambda2_ratio: f64,
    master_seed: u64,
) -> Result<CvResult, CoreError> {
    let n = raw_x.nrows();
    let p = raw_x.ncols();
    let k = y_coefs.ncols();
    if y_coefs.nrows() != n {
        return Err(CoreError::shape("design rows != response curves"));
    }
    if folds < 2 || folds > n {
        return Err(CoreError::input("invalid fold count"));
    }
    let full = DesignMatrix::standardize(raw_x, names.to_vec())?;
    let full_center = {
        let mut c = vec![0.0; k];
        for i in 0..n {
            for (cv, yv) in c.iter_mut().zip(y_coefs.row(i)) {
                *cv += yv;
            }
        }
        for cv in c.iter_mut() {
            *cv /= n as f64;
        }
        c
    };
    let mut y_centered = y_coefs.clone();
    for i in 0..n {
        for (yv, cv) in y_centered.row_mut(i).iter_mut().zip(&full_center) {
            *yv -= cv;
        }
    }
    let lam_max = fgen_lambda_max(&full.x, &y_centered, gram)?;
    if !(lam_max > 0.0) {
        return Err(CoreError::rank("functional lambda_max = 0 on the full sample"));
    }
    let grid = crate::elastic_net::path_grid(lam_max, grid_size);
    let mut assignment = vec![0usize; n];
    {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = crate::seed::rng(master_seed, "fgen-cv", 0);
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    let mut fold_err = Mat::zeros(folds, grid_size);
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let tn = train_idx.len();
        let mut tr_x = Mat::zeros(tn, p);
        let mut tr_y = Mat::zeros(tn, k);
        for (r, &i) in train_idx.iter().enumerate() {
            tr_x.row_mut(r).copy_from_slice(raw_x.row(i));
            tr_y.row_mut(r).copy_from_slice(y_coefs.row(i));
        }
        let design = DesignMatrix::standardize(&tr_x, names.to_vec())?;
        let mut center = vec![0.0; k];
        for r in 0..tn {
            for (cv, yv) in center.iter_mut().zip(tr_y.row(r)) {
                *cv += yv;
            }
        }
        for cv in center.iter_mut() {
            *cv /= tn as f64;
        }
        for r in 0..tn {
            for (yv, cv) in tr_y.row_mut(r).iter_mut().zip(&center) {
                *yv -= cv;
            }
        }
        let mut warm = Mat::zeros(p, k);
        for (g, &l1) in grid.iter().enumerate() {
            let opts = FGenOptions {
                init: Some(warm.clone()),
                ..FGenOptions::default()
            };
            let fit = fgen_fit_with(&design.x, &tr_y, gram, l1, lambda2_ratio * l1, &opts)?;
            warm = fit.coefs.clone();
            let mut err = 0.0;
            for &i in &test_idx {
                let mut r = vec![0.0; k];
                for (c, rv) in r.iter_mut().enumerate() {
                    *rv = y_coefs[(i, c)] - center[c];
                }
                for j in 0..p {
                    let xv = (raw_x[(i, j)] - design.means[j]) / design.sds[j];
                    if xv != 0.0 {
                        for (rv, bv) in r.iter_mut().zip(warm.row(j)) {
                            *rv -= xv * bv;
                        }
                    }
                }
                let gn = gram_norm(&r, gram);
                err += gn * gn;
            }
            fold_err[(f, g)] = err / test_idx.len() as f64;
        }
    }
    let mut mean_err = Vec::with_capacity(grid_size);
    let mut se_err = Vec::with_capacity(grid_size);
    for g in 0..grid_size {
        let col: Vec<f64> = (0..folds).map(|f| fold_err[(f, g)]).collect();
        let m = col.iter().sum::<f64>() / folds as f64;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (folds - 1) as f64;
        mean_err.push(m);
        se_err.push((var / folds as f64).sqrt());
    }
    let mut best = 0;
    for g in 0..grid_size {
        if mean_err[g] < mean_err[best] {
            best = g;
        }
    }
    let threshold = mean_err[best] + se_err[best];
    let one_se = (0..grid_size)
        .find(|&g| mean_err[g] <= threshold)
        .unwrap_or(best);
    Ok(CvResult {
        lambda1_min: grid[best],
        lambda1_1se: grid[one_se],
        grid,
        mean_err,
        se_err,
    })
}

/// A fitted coefficient function with its pointwise standard errors.
/// The 1.96-SE band and the significance mask are derived, not stored.
#[derive(Debug, Clone)]
pub struct CoefficientCurve {
    pub name: String,
    pub curve: Curve,
    /// Smoothed values on the fit grid.
    pub values: Vec<f64>,
    pub se: Vec<f64>,
}

impl CoefficientCurve {
    /// (lower, upper) pointwise 1.96-SE band around the smoothed values.
    pub fn band(&self) -> (Vec<f64>, Vec<f64>) {
        let lower = self
            .values
            .iter()
            .zip(&self.se)
            .map(|(v, s)| v - 1.96 * s)
            .collect();
        let upper = self
            .values
            .iter()
            .zip(&self.se)
            .map(|(v, s)| v + 1.96 * s)
            .collect();
        (lower, upper)
    }

    /// Grid points where the band excludes zero.
    pub fn significant_mask(&self) -> Vec<bool> {
        self.values
            .iter()
            .zip(&self.se)
            .map(|(v, s)| s.is_finite() && v.abs() > 1.96 * s)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FosFit {
    pub beta: CoefficientCurve,
    pub intercept: CoefficientCurve,
    pub r2: f64,
}

/// Pointwise simple regression of response curves on one scalar covariate.
/// Coefficient and intercept functions are smoothed afterward with their own
/// GCV-selected penalties; SEs stay pointwise.
pub fn fos_marginal(
    y_values: &Mat,
    x: &[f64],
    grid: &Grid,
    basis: &Arc<BasisSystem>,
    lambdas: &[f64],
    name: &str,
) -> Result<FosFit, CoreError> {
    let n = y_values.nrows();
    let t_len = y_values.ncols();
    if x.len() != n {
        return Err(CoreError::shape("covariate length != curve count"));
    }
    if grid.len() != t_len {
        return Err(CoreError::shape("grid length != curve sample count"));
    }
    if n < 3 {
        return Err(CoreError::input("need at least 3 curves"));
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|&v| (v - xm) * (v - xm)).sum();
    if sxx == 0.0 {
        return Err(CoreError::input("zero-variance covariate"));
    }
    let mut beta_raw = Vec::with_capacity(t_len);
    let mut alpha_raw = Vec::with_capacity(t_len);
    let mut se = Vec::with_capacity(t_len);
    let mut sse_t = Vec::with_capacity(t_len);
    let mut sst_t = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let col: Vec<f64> = (0..n).map(|i| y_values[(i, t)]).collect();
        let ym = col.iter().sum::<f64>() / n as f64;
        let sxy: f64 = x
            .iter()
            .zip(&col)
            .map(|(&xv, &yv)| (xv - xm) * (yv - ym))
            .sum();
        let b = sxy / sxx;
        let a = ym - b * xm;
        let mut sse = 0.0;
        let mut sst = 0.0;
        for (&xv, &yv) in x.iter().zip(&col) {
            let e = yv - a - b * xv;
            sse += e * e;
            sst += (yv - ym) * (yv - ym);
        }
        let sigma2 = sse / (n as f64 - 2.0);
        beta_raw.push(b);
        alpha_raw.push(a);
        se.push((sigma2 / sxx).sqrt());
        sse_t.push(sse);
        sst_t.push(sst);
    }
    let int_sse = grid.integrate(&sse_t)?;
    let int_sst = grid.integrate(&sst_t)?;
    if int_sst <= 0.0 {
        return Err(CoreError::input("constant response field"));
    }
    let r2 = 1.0 - int_sse / int_sst;
    let smoother = Smoother::new(basis.clone(), grid)?;
    let beta_fit = smoother.fit_collection(&[beta_raw], lambdas)?;
    let alpha_fit = smoother.fit_collection(&[alpha_raw], lambdas)?;
    let beta_curve = beta_fit.fits[0].curve.clone();
    let alpha_curve = alpha_fit.fits[0].curve.clone();
    let beta_values = beta_curve.values_on(grid)?;
    let alpha_values = alpha_curve.values_on(grid)?;
    let alpha_se: Vec<f64> = {
        // intercept SE: sigma(t) * sqrt(1/n + xbar^2 / Sxx)
        let factor = (1.0 / n as f64 + xm * xm / sxx).sqrt();
        se.iter()
            .zip(&sse_t)
            .map(|(_, &sse)| (sse / (n as f64 - 2.0)).sqrt() * factor)
            .collect()
    };
    Ok(FosFit {
        beta: CoefficientCurve {
            name: name.to_string(),
            curve: beta_curve,
            values: beta_values,
            se,
        },
        intercept: CoefficientCurve {
            name: "intercept".to_string(),
            curve: alpha_curve,
            values: alpha_values,
            se: alpha_se,
        },
        r2,
    })
}
