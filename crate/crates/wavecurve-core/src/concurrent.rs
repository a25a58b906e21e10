//! Lagged concurrent function-on-function regression: at every day t of the
//! truncated domain, ordinary least squares of the response on the lagged
//! functional predictors, scalar covariates, a group dummy, and the dummy
//! interactions. Coefficient functions are smoothed afterward; standard
//! errors stay pointwise, which keeps them exact per grid point.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::bspline::BasisSystem;
use crate::error::CoreError;
use crate::fgen::CoefficientCurve;
use crate::grid::Grid;
use crate::linalg::{ols, Mat};
#[cfg(not(feature = "std"))]
use crate::math::F64Math;
use crate::smoothing::Smoother;

const DROP_TOL: f64 = 1e-10;

/// Inputs shared by every lag: response curves sampled on the daily grid,
/// functional predictors on the same grid (already aligned by apply_shifts),
/// scalar covariates, and the binary group dummy.
#[derive(Debug, Clone)]
pub struct ConcurrentData<'a> {
    pub y_values: &'a Mat,
    pub x_fun: &'a [Mat],
    pub fun_names: &'a [String],
    pub x_scal: &'a Mat,
    pub scal_names: &'a [String],
    pub group: &'a [f64],
}

impl<'a> ConcurrentData<'a> {
    fn validate(&self) -> Result<(usize, usize, usize, usize), CoreError> {
        let n = self.y_values.nrows();
        let t_len = self.y_values.ncols();
        let m = self.x_fun.len();
        let j = self.x_scal.ncols();
        if self.fun_names.len() != m {
            return Err(CoreError::shape("one name per functional predictor"));
        }
        if self.scal_names.len() != j {
            return Err(CoreError::shape("one name per scalar covariate"));
        }
        for f in self.x_fun {
            if f.nrows() != n || f.ncols() != t_len {
                return Err(CoreError::shape(
                    "functional predictor shape != response shape",
                ));
            }
        }
        if self.x_scal.nrows() != n && j > 0 {
            return Err(CoreError::shape("scalar covariate rows != units"));
        }
        if self.group.len() != n {
            return Err(CoreError::shape("group dummy length != units"));
        }
        if self
            .group
            .iter()
            .any(|&g| g != 0.0 && g != 1.0)
        {
            return Err(CoreError::input("group dummy must be 0/1"));
        }
        Ok((n, t_len, m, j))
    }
}

/// Fitted concurrent model at one lag. Coefficient curves live on the
/// truncated domain re-anchored at zero; absolute day = t + lag.
#[derive(Debug, Clone)]
pub struct ConcurrentFit {
    pub lag: usize,
    pub col_names: Vec<String>,
    /// Smoothed coefficient functions, one per design column.
    pub curves: Vec<CoefficientCurve>,
    /// Raw pointwise estimates (rows = truncated grid, cols = design columns).
    pub beta_raw: Mat,
    pub se_raw: Mat,
    /// Residual curves on the truncated grid (rows = units).
    pub residuals: Mat,
    pub total_r2: f64,
    /// Per-predictor partial R2; main effect and its interaction are dropped
    /// jointly.
    pub partial_r2: Vec<(String, f64)>,
    /// Columns dropped as collinear at one or more grid points, with counts.
    pub dropped: Vec<(String, usize)>,
    pub sse_t: Vec<f64>,
    pub sst_t: Vec<f64>,
}

fn column_layout(fun_names: &[String], scal_names: &[String]) -> Vec<String> {
    let mut names = vec!["intercept".to_string(), "group".to_string()];
    for f in fun_names {
        names.push(f.clone());
    }
    for f in fun_names {
        names.push(format!("{f}:group"));
    }
    for s in scal_names {
        names.push(s.clone());
    }
    for s in scal_names {
        names.push(format!("{s}:group"));
    }
    names
}

/// Design matrix at response day `t`: [1, d, X_m(t-lag), d*X_m(t-lag), x_j, d*x_j].
fn design_at(
    data: &ConcurrentData,
    n: usize,
    m: usize,
    j: usize,
    t: usize,
    lag: usize,
    skip: &[usize],
) -> Mat {
    let n_cols_full = 2 + 2 * m + 2 * j;
    let keep: Vec<usize> = (0..n_cols_full).filter(|c| !skip.contains(c)).collect();
    let mut x = Mat::zeros(n, keep.len());
    for (ci, &c) in keep.iter().enumerate() {
        for i in 0..n {
            let d = data.group[i];
            let v = if c == 0 {
                1.0
            } else if c == 1 {
                d
            } else if c < 2 + m {
                data.x_fun[c - 2][(i, t - lag)]
            } else if c < 2 + 2 * m {
                d * data.x_fun[c - 2 - m][(i, t - lag)]
            } else if c < 2 + 2 * m + j {
                data.x_scal[(i, c - 2 - 2 * m)]
            } else {
                d * data.x_scal[(i, c - 2 - 2 * m - j)]
            };
            x[(i, ci)] = v;
        }
    }
    x
}

/// Pointwise fits over the truncated domain with the given columns removed.
/// Returns (sse_t, sst_t) plus raw estimates when `record` is set.
fn pointwise_pass(
    data: &ConcurrentData,
    lag: usize,
    skip: &[usize],
    record: bool,
) -> Result<(Vec<f64>, Vec<f64>, Option<(Mat, Mat, Mat, Vec<usize>)>), CoreError> {
    let (n, t_len, m, j) = data.validate()?;
    if lag >= t_len {
        return Err(CoreError::input(format!(
            "lag {lag} leaves no truncated domain (curve length {t_len})"
        )));
    }
    let n_cols_full = 2 + 2 * m + 2 * j;
    let keep: Vec<usize> = (0..n_cols_full).filter(|c| !skip.contains(c)).collect();
    let t_trunc = t_len - lag;
    let mut sse_t = Vec::with_capacity(t_trunc);
    let mut sst_t = Vec::with_capacity(t_trunc);
    let mut beta = Mat::zeros(t_trunc, n_cols_full);
    let mut se = Mat::zeros(t_trunc, n_cols_full);
    let mut residuals = Mat::zeros(n, t_trunc);
    let mut drop_counts = vec![0usize; n_cols_full];
    for t in lag..t_len {
        let x = design_at(data, n, m, j, t, lag, skip);
        let y: Vec<f64> = (0..n).map(|i| data.y_values[(i, t)]).collect();
        let fit = ols(&x, &y, DROP_TOL)?;
        let ym = y.iter().sum::<f64>() / n as f64;
        let sst: f64 = y.iter().map(|&v| (v - ym) * (v - ym)).sum();
        sse_t.push(fit.sse);
        sst_t.push(sst);
        if record {
            let row = t - lag;
            let dof = n as f64 - fit.rank as f64;
            let sigma2 = if dof > 0.0 { fit.sse / dof } else { f64::NAN };
            for (ci, &c) in keep.iter().enumerate() {
                if fit.kept[ci] {
                    beta[(row, c)] = fit.coefs[ci];
                    se[(row, c)] = (sigma2 * fit.xtx_inv_diag[ci]).sqrt();
                } else {
                    beta[(row, c)] = 0.0;
                    se[(row, c)] = f64::NAN;
                    drop_counts[c] += 1;
                }
            }
            for i in 0..n {
                residuals[(i, row)] = y[i] - fit.fitted[i];
            }
        }
    }
    let extra = record.then_some((beta, se, residuals, drop_counts));
    Ok((sse_t, sst_t, extra))
}

fn integrated_r2(grid: &Grid, sse_t: &[f64], sst_t: &[f64]) -> Result<f64, CoreError> {
    let int_sse = grid.integrate(sse_t)?;
    let int_sst = grid.integrate(sst_t)?;
    if int_sst <= 0.0 {
        return Err(CoreError::input("constant response field"));
    }
    Ok(1.0 - int_sse / int_sst)
}

/// Smoothing setup for the post-hoc coefficient smoothing.
#[derive(Debug, Clone)]
pub struct CoefSmoothing {
    pub n_breakpoints: usize,
    pub lambdas: Vec<f64>,
}

impl Default for CoefSmoothing {
    fn default() -> Self {
        CoefSmoothing {
            n_breakpoints: 21,
            lambdas: crate::smoothing::default_lambda_grid(),
        }
    }
}

pub fn concurrent_fit(
    data: &ConcurrentData,
    lag: usize,
    smoothing: &CoefSmoothing,
) -> Result<ConcurrentFit, CoreError> {
    let (_n, t_len, m, j) = data.validate()?;
    let (sse_t, sst_t, extra) = pointwise_pass(data, lag, &[], true)?;
    let (beta_raw, se_raw, residuals, drop_counts) = extra.unwrap();
    let t_trunc = t_len - lag;
    let grid = Grid::daily(t_trunc)?;
    let total_r2 = integrated_r2(&grid, &sse_t, &sst_t)?;
    let col_names = column_layout(data.fun_names, data.scal_names);

    // smooth each coefficient function on the re-anchored truncated grid
    let basis = Arc::new(BasisSystem::cubic(
        (t_trunc - 1) as f64,
        smoothing.n_breakpoints,
    )?);
    let smoother = Smoother::new(basis, &grid)?;
    let mut curves = Vec::with_capacity(col_names.len());
    for (c, name) in col_names.iter().enumerate() {
        let raw: Vec<f64> = (0..t_trunc).map(|t| beta_raw[(t, c)]).collect();
        let fit = smoother.fit_collection(&[raw], &smoothing.lambdas)?;
        let curve = fit.fits[0].curve.clone();
        let values = curve.values_on(&grid)?;
        let se: Vec<f64> = (0..t_trunc).map(|t| se_raw[(t, c)]).collect();
        curves.push(CoefficientCurve {
            name: name.clone(),
            curve,
            values,
            se,
        });
    }

    // partial R2 per predictor: drop the main effect and its interaction
    let mut partial_r2 = Vec::new();
    let mut pairs: Vec<(String, Vec<usize>)> = Vec::new();
    for (idx, f) in data.fun_names.iter().enumerate() {
        pairs.push((f.clone(), vec![2 + idx, 2 + m + idx]));
    }
    for (idx, s) in data.scal_names.iter().enumerate() {
        pairs.push((s.clone(), vec![2 + 2 * m + idx, 2 + 2 * m + j + idx]));
    }
    {
        // the dummy and every interaction jointly
        let mut cols = vec![1usize];
        cols.extend((2 + m)..(2 + 2 * m));
        cols.extend((2 + 2 * m + j)..(2 + 2 * m + 2 * j));
        pairs.push(("group".to_string(), cols));
    }
    for (name, skip) in pairs {
        let (r_sse, r_sst, _) = pointwise_pass(data, lag, &skip, false)?;
        let r2_red = integrated_r2(&grid, &r_sse, &r_sst)?;
        let pr2 = crate::elastic_net::partial_r2(
            total_r2.clamp(0.0, 1.0),
            r2_red.clamp(0.0, 1.0 - 1e-15),
        )?;
        partial_r2.push((name, pr2));
    }

    let dropped = col_names
        .iter()
        .zip(&drop_counts)
        .filter(|(_, &c)| c > 0)
        .map(|(n, &c)| (n.clone(), c))
        .collect();
    Ok(ConcurrentFit {
        lag,
        col_names,
        curves,
        beta_raw,
        se_raw,
        residuals,
        total_r2,
        partial_r2,
        dropped,
        sse_t,
        sst_t,
    })
}

#[derive(Debug, Clone)]
pub struct LagSummary {
    pub lags: Vec<usize>,
    pub total_r2: Vec<f64>,
    pub mean_total_r2: f64,
    pub predictor_names: Vec<String>,
    /// Rows = lags, cols = predictors.
    pub partial_r2: Mat,
    pub mean_partial_r2: Vec<f64>,
}

/// One concurrent fit per lag plus averaged total and partial R2.
pub fn lag_sweep(
    data: &ConcurrentData,
    lags: &[usize],
    smoothing: &CoefSmoothing,
) -> Result<(Vec<ConcurrentFit>, LagSummary), CoreError> {
    if lags.is_empty() {
        return Err(CoreError::input("empty lag list"));
    }
    let mut fits = Vec::with_capacity(lags.len());
    for &lag in lags {
        fits.push(concurrent_fit(data, lag, smoothing)?);
    }
    let predictor_names: Vec<String> = fits[0]
        .partial_r2
        .iter()
        .map(|(n, _)| n.clone())
        .collect();
    let mut partial = Mat::zeros(lags.len(), predictor_names.len());
    let mut total = Vec::with_capacity(lags.len());
    for (li, fit) in fits.iter().enumerate() {
        total.push(fit.total_r2);
        for (pi, (_, v)) in fit.partial_r2.iter().enumerate() {
            partial[(li, pi)] = *v;
        }
    }
    let mean_total = total.iter().sum::<f64>() / total.len() as f64;
    let mean_partial: Vec<f64> = (0..predictor_names.len())
        .map(|pi| (0..lags.len()).map(|li| partial[(li, pi)]).sum::<f64>() / lags.len() as f64)
        .collect();
    let summary = LagSummary {
        lags: lags.to_vec(),
        total_r2: total,
        mean_total_r2: mean_total,
        predictor_names,
        partial_r2: partial,
        mean_partial_r2: mean_partial,
    };
    Ok((fits, summary))
}

/// Integrated R2 of each functional variable (rows) regressed concurrently at
/// lag 0 on each functional or scalar variable (columns), one at a time.
pub fn collinearity_grid(
    fun_vals: &[Mat],
    fun_names: &[String],
    x_scal: &Mat,
    scal_names: &[String],
) -> Result<(Mat, Vec<String>, Vec<String>), CoreError> {
    let m = fun_vals.len();
    if m == 0 {
        return Err(CoreError::input("no functional variables"));
    }
    let n = fun_vals[0].nrows();
    let t_len = fun_vals[0].ncols();
    for f in fun_vals {
        if f.nrows() != n || f.ncols() != t_len {
            return Err(CoreError::shape("functional variables must share shape"));
        }
    }
    let j = x_scal.ncols();
    if j > 0 && x_scal.nrows() != n {
        return Err(CoreError::shape("scalar covariate rows != units"));
    }
    let grid = Grid::daily(t_len)?;
    let col_names: Vec<String> = fun_names
        .iter()
        .chain(scal_names.iter())
        .cloned()
        .collect();
    let mut out = Mat::zeros(m, m + j);
    for row in 0..m {
        for col in 0..m + j {
            if col == row {
                out[(row, col)] = 1.0;
                continue;
            }
            let mut sse_t = Vec::with_capacity(t_len);
            let mut sst_t = Vec::with_capacity(t_len);
            for t in 0..t_len {
                let y: Vec<f64> = (0..n).map(|i| fun_vals[row][(i, t)]).collect();
                let mut x = Mat::zeros(n, 2);
                for i in 0..n {
                    x[(i, 0)] = 1.0;
                    x[(i, 1)] = if col < m {
                        fun_vals[col][(i, t)]
                    } else {
                        x_scal[(i, col - m)]
                    };
                }
                let fit = ols(&x, &y, DROP_TOL)?;
                let ym = y.iter().sum::<f64>() / n as f64;
                sse_t.push(fit.sse);
                sst_t.push(y.iter().map(|&v| (v - ym) * (v - ym)).sum());
            }
            out[(row, col)] = integrated_r2(&grid, &sse_t, &sst_t)?;
        }
    }
    Ok((out, fun_names.to_vec(), col_names))
}
