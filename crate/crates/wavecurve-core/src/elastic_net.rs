//! Scalar elastic net and its surrounding model-selection machinery:
//! standardized designs, coordinate descent, the lambda-path with
//! lambda-max ratios, stability resampling, cross-validation, and regression
//! diagnostics (marginal fits, first principal component, VIF, partial R2).
//!
//! The objective is `1/2 ||y - X b||^2 + l1 ||b||_1 + (l2/2) ||b||^2` with no
//! 1/n factor; `lambda_max = ||X' y||_inf` is exact under this scaling, so
//! the fit at `l1 >= lambda_max` is identically zero.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::CoreError;
use crate::linalg::{dot, ols, Mat};
#[cfg(not(feature = "std"))]
use crate::math::F64Math;

/// Standardized design: every column has mean 0 and unit sample standard
/// deviation (divisor n-1).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: Mat,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Standardize a vector to mean 0, unit sample sd. Returns (values, mean, sd).
pub fn standardize_vec(v: &[f64]) -> Result<(Vec<f64>, f64, f64), CoreError> {
    let n = v.len();
    if n < 2 {
        return Err(CoreError::input("need at least 2 observations"));
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 || !var.is_finite() {
        return Err(CoreError::rank("zero-variance column cannot be standardized"));
    }
    let sd = var.sqrt();
    Ok((v.iter().map(|&x| (x - mean) / sd).collect(), mean, sd))
}

impl DesignMatrix {
    pub fn standardize(raw: &Mat, names: Vec<String>) -> Result<Self, CoreError> {
        if names.len() != raw.ncols() {
            return Err(CoreError::shape("one name per column required"));
        }
        let n = raw.nrows();
        let p = raw.ncols();
        let mut x = Mat::zeros(n, p);
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        for j in 0..p {
            let col = raw.col(j);
            let (std_col, mean, sd) = standardize_vec(&col).map_err(|e| match e {
                CoreError::Rank(_) => {
                    CoreError::rank(format!("column {:?} has zero variance", names[j]))
                }
                other => other,
            })?;
            for i in 0..n {
                x[(i, j)] = std_col[i];
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(DesignMatrix { x, names, means, sds })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// `lambda_max = ||X' y||_inf`: the smallest l1 at which the fit is all-zero.
pub fn lambda_max(x: &Mat, y: &[f64]) -> f64 {
    x.t_mul_vec(y).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ElasticNetOptions {
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Warm-start coefficients.
    pub init: Option<Vec<f64>>,
    /// Record the objective after every sweep.
    pub trace: bool,
}

impl Default for ElasticNetOptions {
    fn default() -> Self {
        ElasticNetOptions {
            tol: 1e-8,
            max_sweeps: 100_000,
            init: None,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnetFit {
    pub coefs: Vec<f64>,
    pub sweeps: usize,
    pub objective: f64,
    /// Objective after each sweep when tracing was requested.
    pub objective_trace: Vec<f64>,
}

pub fn enet_objective(x: &Mat, y: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let fitted = x.mul_vec(beta);
    let sse: f64 = y
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let l1_term: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2_term: f64 = beta.iter().map(|b| b * b).sum();
    0.5 * sse + l1 * l1_term + 0.5 * l2 * l2_term
}

/// Largest violation of the elastic-net stationarity conditions at `beta`:
/// for zero coefficients `|x_j' r|` may not exceed `l1`; for active ones
/// `x_j' r - l2 b_j` must equal `l1 sign(b_j)`.
pub fn kkt_violation(x: &Mat, y: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let fitted = x.mul_vec(beta);
    let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let grad = x.t_mul_vec(&r);
    let mut worst = 0.0_f64;
    for j in 0..beta.len() {
        let v = if beta[j] == 0.0 {
            (grad[j].abs() - l1).max(0.0)
        } else {
            (grad[j] - l2 * beta[j] - l1 * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Duality gap via the augmented-lasso form (rows `sqrt(l2) I` appended).
/// For `l1 = 0` the problem is ridge and the gradient norm is reported.
pub fn duality_gap(x: &Mat, y: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let fitted = x.mul_vec(beta);
    let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let grad: Vec<f64> = {
        let mut g = x.t_mul_vec(&r);
        for (gj, bj) in g.iter_mut().zip(beta) {
            *gj -= l2 * bj;
        }
        g
    };
    if l1 == 0.0 {
        return grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let grad_inf = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if grad_inf > l1 { l1 / grad_inf } else { 1.0 };
    // augmented residual is (r, -sqrt(l2) beta); nu = scale * that
    let r_aug_sq: f64 = dot(&r, &r) + l2 * dot(beta, beta);
    let primal = 0.5 * r_aug_sq + l1 * beta.iter().map(|b| b.abs()).sum::<f64>();
    // D(nu) = y~' nu - 1/2 ||nu||^2 with y~ = (y, 0)
    let ytnu = scale * dot(y, &r);
    let dual = ytnu - 0.5 * scale * scale * r_aug_sq;
    primal - dual
}

/// Cyclic coordinate descent for the elastic net.
pub fn elastic_net_fit_with(
    x: &Mat,
    y: &[f64],
    l1: f64,
    l2: f64,
    opts: &ElasticNetOptions,
) -> Result<EnetFit, CoreError> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(CoreError::shape(format!(
            "response length {} != design rows {}",
            y.len(),
            n
        )));
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
    let mut beta = match &opts.init {
        Some(b) if b.len() == p => b.clone(),
        Some(_) => return Err(CoreError::shape("warm-start length != p")),
        None => vec![0.0; p],
    };
    let mut residual: Vec<f64> = {
        let fitted = x.mul_vec(&beta);
        y.iter().zip(&fitted).map(|(a, b)| a - b).collect()
    };
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let xj = x.col(j);
            let z = dot(&xj, &residual) + col_sq[j] * beta[j];
            let new = soft(z, l1) / (col_sq[j] + l2);
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, v) in residual.iter_mut().zip(&xj) {
                    *r -= delta * v;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        sweeps += 1;
        if opts.trace {
            trace.push(enet_objective(x, y, &beta, l1, l2));
        }
        if max_delta < opts.tol {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(CoreError::NoConvergence {
                sweeps,
                gap: duality_gap(x, y, &beta, l1, l2),
            });
        }
    }
    let objective = enet_objective(x, y, &beta, l1, l2);
    Ok(EnetFit {
        coefs: beta,
        sweeps,
        objective,
        objective_trace: trace,
    })
}

pub fn elastic_net_fit(x: &Mat, y: &[f64], l1: f64, l2: f64) -> Result<EnetFit, CoreError> {
    elastic_net_fit_with(x, y, l1, l2, &ElasticNetOptions::default())
}

/// Geometric lambda grid from `lambda_max` down to `1e-3 * lambda_max`.
pub fn path_grid(lam_max: f64, grid_size: usize) -> Vec<f64> {
    let ratio_min: f64 = 1e-3;
    (0..grid_size)
        .map(|i| {
            let f = if grid_size == 1 {
                1.0
            } else {
                ratio_min.powf(i as f64 / (grid_size - 1) as f64)
            };
            lam_max * f
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PathFit {
    pub lambda1_grid: Vec<f64>,
    /// One coefficient row per grid point.
    pub coefs: Mat,
    /// Per-feature lambda-max ratio: the last grid value at which the feature
    /// was still absent, over lambda_max. A feature entering right below
    /// lambda_max gets 1.0; one that never enters gets 0.
    pub lambda_ratio: Vec<f64>,
    /// Grid index of first entry per feature (None = never entered).
    pub first_entry: Vec<Option<usize>>,
}

/// Fit the descending lambda path with warm starts and record per-feature
/// lambda-max ratios. `lambda2_ratio` ties l2 to l1 at every grid point.
pub fn path_with_ratios(
    x: &Mat,
    y: &[f64],
    grid_size: usize,
    lambda2_ratio: f64,
) -> Result<PathFit, CoreError> {
    if grid_size < 2 {
        return Err(CoreError::input("path needs at least 2 grid points"));
    }
    let lam_max = lambda_max(x, y);
    if !(lam_max > 0.0) {
        return Err(CoreError::rank(
            "lambda_max = 0: response is orthogonal to every column",
        ));
    }
    let grid = path_grid(lam_max, grid_size);
    let p = x.ncols();
    let mut coefs = Mat::zeros(grid_size, p);
    let mut first_entry: Vec<Option<usize>> = vec![None; p];
    let mut warm = vec![0.0; p];
    for (i, &l1) in grid.iter().enumerate() {
        let opts = ElasticNetOptions {
            init: Some(warm.clone()),
            ..ElasticNetOptions::default()
        };
        let fit = elastic_net_fit_with(x, y, l1, lambda2_ratio * l1, &opts)?;
        warm = fit.coefs.clone();
        for j in 0..p {
            coefs[(i, j)] = fit.coefs[j];
            if first_entry[j].is_none() && fit.coefs[j] != 0.0 {
                debug_assert!(i >= 1, "nonzero coefficient at lambda_max");
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
    Ok(PathFit {
        lambda1_grid: grid,
        coefs,
        lambda_ratio,
        first_entry,
    })
}

#[derive(Debug, Clone)]
pub struct StabilitySummary {
    pub names: Vec<String>,
    /// Mean lambda-max ratio per feature over the used runs.
    pub mean_ratio: Vec<f64>,
    pub runs_requested: usize,
    pub runs_used: usize,
    pub runs_skipped: usize,
}

/// Stability resampling: repeat the path on random subsamples (drawn without
/// replacement, re-standardized each time) and average the ratios.
///
/// Runs whose subsample is smaller than p+1 or contains a zero-variance
/// column are skipped and counted.
#[allow(clippy::too_many_arguments)]
pub fn stability(
    raw_x: &Mat,
    names: &[String],
    y_raw: &[f64],
    runs: usize,
    n_range: (usize, usize),
    grid_size: usize,
    lambda2_ratio: f64,
    master_seed: u64,
) -> Result<StabilitySummary, CoreError> {
    let n = raw_x.nrows();
    let p = raw_x.ncols();
    if y_raw.len() != n {
        return Err(CoreError::shape("response length != design rows"));
    }
    let (lo, hi) = n_range;
    if lo > hi || hi > n || lo == 0 {
        return Err(CoreError::input(format!(
            "subsample range [{lo}, {hi}] invalid for n = {n}"
        )));
    }
    let mut sums = vec![0.0; p];
    let mut used = 0;
    let mut skipped = 0;
    for run in 0..runs {
        let mut rng = crate::seed::rng(master_seed, "stability", run as u64);
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
        let mut sub_y = Vec::with_capacity(m);
        for (r, &i) in idx.iter().enumerate() {
            sub_x.row_mut(r).copy_from_slice(raw_x.row(i));
            sub_y.push(y_raw[i]);
        }
        let design = match DesignMatrix::standardize(&sub_x, names.to_vec()) {
            Ok(d) => d,
            Err(CoreError::Rank(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ys = match standardize_vec(&sub_y) {
            Ok((v, _, _)) => v,
            Err(CoreError::Rank(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let path = match path_with_ratios(&design.x, &ys, grid_size, lambda2_ratio) {
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

#[derive(Debug, Clone)]
pub struct CvResult {
    pub lambda1_min: f64,
    pub lambda1_1se: f64,
    pub grid: Vec<f64>,
    pub mean_err: Vec<f64>,
    pub se_err: Vec<f64>,
}

/// K-fold cross-validation over the lambda path (l2 = ratio * l1).
///
/// Folds come from one deterministic shuffle; each training split is
/// re-standardized and its scaling applied to the held-out rows. Returns the
/// error-minimizing l1 and the largest l1 within one standard error of it.
pub fn cv_select(
    raw_x: &Mat,
    names: &[String],
    y_raw: &[f64],
    folds: usize,
    grid_size: usize,
    lambda2_ratio: f64,
    master_seed: u64,
) -> Result<CvResult, CoreError> {
    let n = raw_x.nrows();
    let p = raw_x.ncols();
    if folds < 2 || folds > n {
        return Err(CoreError::input(format!(
            "folds = {folds} invalid for n = {n}"
        )));
    }
    // grid anchored at the full-sample lambda_max
    let full = DesignMatrix::standardize(raw_x, names.to_vec())?;
    let (ys_full, _, _) = standardize_vec(y_raw)?;
    let lam_max = lambda_max(&full.x, &ys_full);
    if !(lam_max > 0.0) {
        return Err(CoreError::rank("lambda_max = 0 on the full sample"));
    }
    let grid = path_grid(lam_max, grid_size);
    let mut assignment = vec![0usize; n];
    {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = crate::seed::rng(master_seed, "cv", 0);
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    let mut fold_err = Mat::zeros(folds, grid_size);
    for f in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        let mut tr_x = Mat::zeros(train_idx.len(), p);
        let mut tr_y = Vec::with_capacity(train_idx.len());
        for (r, &i) in train_idx.iter().enumerate() {
            tr_x.row_mut(r).copy_from_slice(raw_x.row(i));
            tr_y.push(y_raw[i]);
        }
        let design = DesignMatrix::standardize(&tr_x, names.to_vec())?;
        let (tr_ys, y_mean, y_sd) = standardize_vec(&tr_y)?;
        let mut warm = vec![0.0; p];
        for (g, &l1) in grid.iter().enumerate() {
            let opts = ElasticNetOptions {
                init: Some(warm.clone()),
                ..ElasticNetOptions::default()
            };
            let fit = elastic_net_fit_with(&design.x, &tr_ys, l1, lambda2_ratio * l1, &opts)?;
            warm = fit.coefs.clone();
            // held-out error in the raw response scale
            let mut sse = 0.0;
            for &i in &test_idx {
                let mut pred = 0.0;
                for j in 0..p {
                    let xv = (raw_x[(i, j)] - design.means[j]) / design.sds[j];
                    pred += xv * fit.coefs[j];
                }
                let pred_raw = pred * y_sd + y_mean;
                let e = y_raw[i] - pred_raw;
                sse += e * e;
            }
            fold_err[(f, g)] = sse / test_idx.len() as f64;
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
    // grid is descending: the largest qualifying l1 is the earliest index
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

/// Simple regression of `y` on one predictor (with intercept).
pub fn marginal_ols(y: &[f64], x: &[f64]) -> Result<(f64, f64), CoreError> {
    if y.len() != x.len() || y.len() < 3 {
        return Err(CoreError::shape("need equal-length series, n >= 3"));
    }
    let n = y.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - xm) * (yi - ym);
        sxx += (xi - xm) * (xi - xm);
        syy += (yi - ym) * (yi - ym);
    }
    if sxx == 0.0 {
        return Err(CoreError::rank("constant predictor in marginal fit"));
    }
    let beta = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((beta, r2))
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub names: Vec<String>,
    pub loadings: Vec<f64>,
    pub scores: Vec<f64>,
    /// Share of total variance carried by the first component.
    pub var_explained: f64,
}

/// First principal component of standardized covariates. Sign convention:
/// the largest-magnitude loading is positive.
pub fn pca_first(raw: &Mat, names: &[String]) -> Result<PcaResult, CoreError> {
    let design = DesignMatrix::standardize(raw, names.to_vec())?;
    let n = design.n();
    let mut cov = design.x.xtx();
    let scale = 1.0 / (n as f64 - 1.0);
    for i in 0..cov.nrows() {
        for j in 0..cov.ncols() {
            cov[(i, j)] *= scale;
        }
    }
    let (evals, evecs) = crate::linalg::sym_eigen(&cov)?;
    let mut v = evecs.col(0);
    let mut dominant = 0;
    for (j, l) in v.iter().enumerate() {
        if l.abs() > v[dominant].abs() {
            dominant = j;
        }
    }
    if v[dominant] < 0.0 {
        for l in v.iter_mut() {
            *l = -*l;
        }
    }
    let scores = design.x.mul_vec(&v);
    let trace: f64 = evals.iter().sum();
    Ok(PcaResult {
        names: names.to_vec(),
        loadings: v,
        scores,
        var_explained: evals[0] / trace,
    })
}

#[derive(Debug, Clone)]
pub struct VifEntry {
    pub name: String,
    pub vif: f64,
    pub infinite: bool,
}

/// Variance inflation factors: `1 / (1 - R2_j)` from regressing each column
/// on the others. Perfect collinearity is flagged rather than fatal.
pub fn vif(raw: &Mat, names: &[String]) -> Result<Vec<VifEntry>, CoreError> {
    let design = DesignMatrix::standardize(raw, names.to_vec())?;
    let n = design.n();
    let p = design.p();
    if p < 2 {
        return Err(CoreError::input("VIF needs at least 2 columns"));
    }
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let yj = design.x.col(j);
        let mut others = Mat::zeros(n, p - 1);
        let mut c = 0;
        for k in 0..p {
            if k == j {
                continue;
            }
            for i in 0..n {
                others[(i, c)] = design.x[(i, k)];
            }
            c += 1;
        }
        let fit = ols(&others, &yj, 1e-10)?;
        let sst: f64 = dot(&yj, &yj); // standardized: mean already 0
        let r2 = 1.0 - fit.sse / sst;
        let infinite = r2 >= 1.0 - 1e-12;
        out.push(VifEntry {
            name: names[j].clone(),
            vif: if infinite { f64::INFINITY } else { 1.0 / (1.0 - r2) },
            infinite,
        });
    }
    Ok(out)
}

/// Partial R2 of the predictors dropped between a full and a nested reduced
/// model: `(R2 - R2_red) / (1 - R2_red)`.
pub fn partial_r2(r2_full: f64, r2_reduced: f64) -> Result<f64, CoreError> {
    if !(0.0..=1.0).contains(&r2_full) || !(0.0..=1.0).contains(&r2_reduced) {
        return Err(CoreError::input("R2 values must lie in [0, 1]"));
    }
    if r2_reduced >= 1.0 {
        return Err(CoreError::rank("reduced model already saturates the response"));
    }
    let v = (r2_full - r2_reduced) / (1.0 - r2_reduced);
    Ok(v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_design(n: usize, p: usize, seed: u64) -> (Mat, Vec<String>) {
        let mut rng = crate::seed::rng(seed, "enet-test", 0);
        let mut m = Mat::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                m[(i, j)] = rng.gen_range(-2.0..2.0) + j as f64 * 0.1;
            }
        }
        let names = (0..p).map(|j| format!("x{j}")).collect();
        (m, names)
    }

    #[test]
    fn standardization_invariants() {
        let (raw, names) = random_design(40, 4, 1);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        for j in 0..4 {
            let col = d.x.col(j);
            let mean = col.iter().sum::<f64>() / 40.0;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / 39.0;
            assert!(mean.abs() <= 1e-10);
            assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_variance_column_rejected() {
        let mut raw = Mat::zeros(10, 2);
        for i in 0..10 {
            raw[(i, 0)] = i as f64;
            raw[(i, 1)] = 3.0;
        }
        let err = DesignMatrix::standardize(&raw, vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, CoreError::Rank(_)));
    }

    #[test]
    fn lambda_max_conventions() {
        // orthogonal response
        let x = Mat::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]).unwrap();
        let y = vec![1.0, 1.0, -1.0, -1.0];
        assert_abs_diff_eq!(lambda_max(&x, &y), 0.0);
        // single standardized column equal to the standardized response:
        // the inner product is n - 1
        let raw = Mat::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]]).unwrap();
        let d = DesignMatrix::standardize(&raw, vec!["x".into()]).unwrap();
        let (ys, _, _) = standardize_vec(&[-1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(lambda_max(&d.x, &ys), 3.0, epsilon = 1e-12);
        // all-zero fit just above lambda_max
        let fit = elastic_net_fit(&d.x, &ys, 1.01 * 3.0, 0.6 * 1.01 * 3.0).unwrap();
        assert!(fit.coefs.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn unpenalized_fit_is_ols() {
        let (raw, names) = random_design(30, 3, 2);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(2, "enet-test", 1);
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0_f64)).collect();
        let fit = elastic_net_fit(&d.x, &y, 0.0, 0.0).unwrap();
        let reference = ols(&d.x, &y, 1e-12).unwrap();
        for (a, b) in fit.coefs.iter().zip(&reference.coefs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn orthonormal_soft_threshold_closed_form() {
        // Gram-Schmidt an iid matrix to get orthonormal columns
        let (raw, _) = random_design(25, 3, 3);
        let mut cols: Vec<Vec<f64>> = (0..3).map(|j| raw.col(j)).collect();
        for j in 0..3 {
            for k in 0..j {
                let proj = dot(&cols[j], &cols[k]);
                let prev = cols[k].clone();
                for (a, b) in cols[j].iter_mut().zip(&prev) {
                    *a -= proj * b;
                }
            }
            let norm = dot(&cols[j], &cols[j]).sqrt();
            for a in cols[j].iter_mut() {
                *a /= norm;
            }
        }
        let mut x = Mat::zeros(25, 3);
        for j in 0..3 {
            for i in 0..25 {
                x[(i, j)] = cols[j][i];
            }
        }
        let mut rng = crate::seed::rng(3, "enet-test", 1);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(-2.0..2.0_f64)).collect();
        let l1 = 0.3;
        let fit = elastic_net_fit(&x, &y, l1, 0.0).unwrap();
        for j in 0..3 {
            let expect = soft(dot(&cols[j], &y), l1);
            assert_abs_diff_eq!(fit.coefs[j], expect, epsilon = 1e-10);
        }
    }

    /// Exhaustive sign-pattern oracle: for each of the 3^p sign patterns,
    /// solve the restricted stationarity system and keep KKT-consistent
    /// candidates; the minimizer is the unique survivor.
    fn enet_oracle(x: &Mat, y: &[f64], l1: f64, l2: f64) -> Vec<f64> {
        let p = x.ncols();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let patterns = 3usize.pow(p as u32);
        for code in 0..patterns {
            let mut signs = Vec::with_capacity(p);
            let mut c = code;
            for _ in 0..p {
                signs.push((c % 3) as i32 - 1); // -1, 0, +1
                c /= 3;
            }
            let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
            let mut beta = vec![0.0; p];
            if !active.is_empty() {
                let mut xa = Mat::zeros(x.nrows(), active.len());
                for (c, &j) in active.iter().enumerate() {
                    for i in 0..x.nrows() {
                        xa[(i, c)] = x[(i, j)];
                    }
                }
                let mut lhs = xa.xtx();
                for d in 0..active.len() {
                    lhs[(d, d)] += l2;
                }
                let mut rhs = xa.t_mul_vec(y);
                for (c, &j) in active.iter().enumerate() {
                    rhs[c] -= l1 * signs[j] as f64;
                }
                let sol = match Cholesky::new(&lhs) {
                    Ok(ch) => ch.solve_vec(&rhs),
                    Err(_) => continue,
                };
                let mut ok = true;
                for (c, &j) in active.iter().enumerate() {
                    if sol[c] * signs[j] as f64 <= 0.0 {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                for (c, &j) in active.iter().enumerate() {
                    beta[j] = sol[c];
                }
            }
            if kkt_violation(x, y, &beta, l1, l2) > 1e-8 {
                continue;
            }
            let obj = enet_objective(x, y, &beta, l1, l2);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, beta));
            }
        }
        best.expect("some sign pattern must satisfy KKT").1
    }

    #[test]
    fn coordinate_descent_matches_sign_pattern_oracle() {
        for trial in 0..25 {
            let (raw, names) = random_design(20, 3, 100 + trial);
            let d = DesignMatrix::standardize(&raw, names).unwrap();
            let mut rng = crate::seed::rng(200 + trial, "enet-test", 2);
            let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0_f64)).collect();
            let lam_max = lambda_max(&d.x, &y);
            let l1 = lam_max * rng.gen_range(0.05..0.8);
            let l2 = 0.6 * l1;
            let fit = elastic_net_fit(&d.x, &y, l1, l2).unwrap();
            let oracle = enet_oracle(&d.x, &y, l1, l2);
            for (a, b) in fit.coefs.iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
            assert!(kkt_violation(&d.x, &y, &fit.coefs, l1, l2) <= 1e-6);
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let (raw, names) = random_design(30, 5, 7);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(7, "enet-test", 3);
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-2.0..2.0_f64)).collect();
        let opts = ElasticNetOptions {
            trace: true,
            ..ElasticNetOptions::default()
        };
        let fit = elastic_net_fit_with(&d.x, &y, 0.5, 0.3, &opts).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn nonconvergence_reports_duality_gap() {
        let (raw, names) = random_design(30, 4, 8);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(8, "enet-test", 4);
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-2.0..2.0_f64)).collect();
        let opts = ElasticNetOptions {
            max_sweeps: 1,
            tol: 1e-14,
            ..ElasticNetOptions::default()
        };
        match elastic_net_fit_with(&d.x, &y, 0.01, 0.006, &opts) {
            Err(CoreError::NoConvergence { sweeps, gap }) => {
                assert_eq!(sweeps, 1);
                assert!(gap.is_finite() && gap >= 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn dominant_predictor_has_ratio_one() {
        let (raw, names) = random_design(50, 4, 9);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(9, "enet-test", 5);
        let y: Vec<f64> = (0..50)
            .map(|i| 3.0 * d.x[(i, 1)] + 0.01 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let path = path_with_ratios(&d.x, &y, 100, 0.6).unwrap();
        assert_abs_diff_eq!(path.lambda_ratio[1], 1.0);
        assert_eq!(path.first_entry[1], Some(1));
        for j in [0usize, 2, 3] {
            assert!(path.lambda_ratio[j] < 1.0);
        }
        // coefficients all zero at the top of the path
        for j in 0..4 {
            assert_eq!(path.coefs[(0, j)], 0.0);
        }
    }

    #[test]
    fn noise_column_ranks_below_signal() {
        let mut rng = crate::seed::rng(10, "enet-test", 6);
        let n = 60;
        let mut raw = Mat::zeros(n, 2);
        for i in 0..n {
            raw[(i, 0)] = rng.gen_range(-1.0..1.0);
            raw[(i, 1)] = rng.gen_range(-1.0..1.0); // pure noise column
        }
        let names = vec!["signal".to_string(), "noise".to_string()];
        let y: Vec<f64> = (0..n)
            .map(|i| 2.0 * raw[(i, 0)] + 0.3 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let summary = stability(&raw, &names, &y, 50, (48, 58), 100, 0.6, 77).unwrap();
        assert!(summary.mean_ratio[0] > summary.mean_ratio[1]);
        assert_eq!(summary.runs_used, 50);
        assert_eq!(summary.runs_skipped, 0);
    }

    #[test]
    fn stability_is_reproducible_and_counts_skips() {
        let (raw, names) = random_design(20, 3, 11);
        let mut rng = crate::seed::rng(11, "enet-test", 7);
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0_f64)).collect();
        let a = stability(&raw, &names, &y, 20, (2, 20), 60, 0.6, 5).unwrap();
        let b = stability(&raw, &names, &y, 20, (2, 20), 60, 0.6, 5).unwrap();
        assert_eq!(a.mean_ratio, b.mean_ratio);
        assert_eq!(a.runs_used + a.runs_skipped, 20);
        assert!(a.runs_skipped > 0); // sizes below p+1=4 occur in [2, 20]
    }

    #[test]
    fn standardization_invariance_of_ratios() {
        let (raw, names) = random_design(40, 3, 12);
        let mut rng = crate::seed::rng(12, "enet-test", 8);
        let y: Vec<f64> = (0..40)
            .map(|i| raw[(i, 0)] - 0.5 * raw[(i, 2)] + 0.1 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let d1 = DesignMatrix::standardize(&raw, names.clone()).unwrap();
        let p1 = path_with_ratios(&d1.x, &y, 80, 0.6).unwrap();
        let mut scaled = raw.clone();
        for i in 0..40 {
            scaled[(i, 1)] *= 500.0;
        }
        let d2 = DesignMatrix::standardize(&scaled, names).unwrap();
        let p2 = path_with_ratios(&d2.x, &y, 80, 0.6).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(p1.lambda_ratio[j], p2.lambda_ratio[j], epsilon = 1e-12);
            for g in 0..80 {
                assert_abs_diff_eq!(p1.coefs[(g, j)], p2.coefs[(g, j)], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn cv_one_se_dominates_min() {
        let (raw, names) = random_design(45, 4, 13);
        let mut rng = crate::seed::rng(13, "enet-test", 9);
        let y: Vec<f64> = (0..45)
            .map(|i| 1.5 * raw[(i, 0)] + rng.gen_range(-0.5..0.5_f64))
            .collect();
        let cv = cv_select(&raw, &names, &y, 5, 60, 0.6, 99).unwrap();
        assert!(cv.lambda1_1se >= cv.lambda1_min);
        // reproducible
        let cv2 = cv_select(&raw, &names, &y, 5, 60, 0.6, 99).unwrap();
        assert_eq!(cv.lambda1_min, cv2.lambda1_min);
        assert_eq!(cv.mean_err, cv2.mean_err);
    }

    #[test]
    fn marginal_identity_fit() {
        let x = vec![0.5, 1.0, 2.0, 3.5, 4.0];
        let (beta, r2) = marginal_ols(&x, &x).unwrap();
        assert_abs_diff_eq!(beta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pca_two_correlated_variables() {
        // exact correlation rho: var_explained = (1 + rho) / 2
        let mut rng = crate::seed::rng(14, "enet-test", 10);
        let n = 400;
        let mut raw = Mat::zeros(n, 2);
        for i in 0..n {
            let a = rng.gen_range(-1.0..1.0);
            let b = rng.gen_range(-1.0..1.0);
            raw[(i, 0)] = a;
            raw[(i, 1)] = 0.8 * a + 0.6 * b;
        }
        let names = vec!["a".to_string(), "b".to_string()];
        let pca = pca_first(&raw, &names).unwrap();
        // empirical correlation of the construction
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let rho = dot(&d.x.col(0), &d.x.col(1)) / (n as f64 - 1.0);
        assert_abs_diff_eq!(pca.var_explained, (1.0 + rho.abs()) / 2.0, epsilon = 1e-10);
        // sign convention: dominant loading positive
        let dominant = pca
            .loadings
            .iter()
            .fold(0.0_f64, |m, &l| if l.abs() > m.abs() { l } else { m });
        assert!(dominant > 0.0);
    }

    #[test]
    fn vif_flags_duplicate_columns() {
        let mut rng = crate::seed::rng(15, "enet-test", 11);
        let n = 30;
        let mut raw = Mat::zeros(n, 3);
        for i in 0..n {
            let a = rng.gen_range(-1.0..1.0);
            raw[(i, 0)] = a;
            raw[(i, 1)] = a; // exact duplicate
            raw[(i, 2)] = rng.gen_range(-1.0..1.0);
        }
        let names = vec!["a".to_string(), "dup".to_string(), "c".to_string()];
        let entries = vif(&raw, &names).unwrap();
        assert!(entries[0].infinite);
        assert!(entries[1].infinite);
        assert!(!entries[2].infinite);
        assert!(entries[2].vif >= 1.0);
    }

    #[test]
    fn partial_r2_from_nested_fits() {
        let (raw, names) = random_design(50, 3, 16);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(16, "enet-test", 12);
        let y: Vec<f64> = (0..50)
            .map(|i| d.x[(i, 0)] + 0.5 * d.x[(i, 1)] + 0.2 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let sst: f64 = {
            let m = y.iter().sum::<f64>() / 50.0;
            y.iter().map(|&v| (v - m) * (v - m)).sum()
        };
        let full = ols(&d.x, &y, 1e-12).unwrap();
        let mut reduced_x = Mat::zeros(50, 2);
        for i in 0..50 {
            reduced_x[(i, 0)] = d.x[(i, 0)];
            reduced_x[(i, 1)] = d.x[(i, 2)];
        }
        let reduced = ols(&reduced_x, &y, 1e-12).unwrap();
        let r2_full = 1.0 - full.sse / sst;
        let r2_red = 1.0 - reduced.sse / sst;
        let pr2 = partial_r2(r2_full, r2_red).unwrap();
        assert!((0.0..=1.0).contains(&pr2));
        assert!(pr2 > 0.1); // x1 carries real signal
        assert_abs_diff_eq!(partial_r2(0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn path_refinement_shrinks_jumps() {
        let (raw, names) = random_design(40, 4, 17);
        let d = DesignMatrix::standardize(&raw, names).unwrap();
        let mut rng = crate::seed::rng(17, "enet-test", 13);
        let y: Vec<f64> = (0..40)
            .map(|i| d.x[(i, 0)] - d.x[(i, 3)] + 0.2 * rng.gen_range(-1.0..1.0_f64))
            .collect();
        let max_jump = |path: &PathFit| -> f64 {
            let mut m = 0.0_f64;
            for g in 1..path.lambda1_grid.len() {
                for j in 0..4 {
                    m = m.max((path.coefs[(g, j)] - path.coefs[(g - 1, j)]).abs());
                }
            }
            m
        };
        let coarse = path_with_ratios(&d.x, &y, 25, 0.6).unwrap();
        let fine = path_with_ratios(&d.x, &y, 200, 0.6).unwrap();
        assert!(max_jump(&fine) < max_jump(&coarse));
    }
}
