//! Landmark registration: peak detection, integer-day shifts to the earliest
//! peak, and domain integration back to the common window.
//!
//! Shifting works on the daily sampled values, not on coefficients: a curve
//! shifted left by `s` days takes its value at day `t + s`, days vacated at
//! the tail are filled with the last observed value (first value for right
//! shifts), and the shifted series is re-smoothed with a freshly selected
//! shared GCV lambda.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::curve::{Curve, CurveSet};
use crate::error::CoreError;
use crate::grid::Grid;
use crate::linalg::Mat;
use crate::smoothing::Smoother;

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Integer day shift per curve (left shift when positive), aligned with
    /// the unit order of the input collection.
    pub shifts: Vec<i64>,
    /// Earliest pre-shift peak day; every unflagged curve is aligned to it.
    pub target_peak_day: f64,
    /// Shifted, re-smoothed curves on the original domain.
    pub curves: CurveSet,
    /// Pre-shift (peak_day, peak_value) per curve.
    pub peak_table: Vec<(f64, f64)>,
    /// True where no usable peak exists (flat or boundary-monotone curve);
    /// such curves keep shift 0.
    pub flags: Vec<bool>,
    /// Shared lambda chosen when re-smoothing the shifted series.
    pub lambda: f64,
}

impl RegistrationResult {
    /// Shift keyed by unit name, for applying to companion collections.
    pub fn shift_map(&self) -> BTreeMap<String, i64> {
        self.curves
            .units()
            .iter()
            .cloned()
            .zip(self.shifts.iter().copied())
            .collect()
    }
}

fn window_indices(grid: &Grid, window: (f64, f64)) -> Result<(usize, usize), CoreError> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(CoreError::input(format!(
            "window [{lo}, {hi}] is empty"
        )));
    }
    let pts = grid.points();
    let start = pts.iter().position(|&p| p >= lo);
    let end = pts.iter().rposition(|&p| p <= hi);
    match (start, end) {
        (Some(s), Some(e)) if s <= e => Ok((s, e)),
        _ => Err(CoreError::input(format!(
            "window [{lo}, {hi}] contains no grid points"
        ))),
    }
}

/// Peak of sampled values restricted to `window`: the grid point of the
/// windowed maximum, ties broken toward the earlier day.
pub fn find_peak_values(
    values: &[f64],
    grid: &Grid,
    window: (f64, f64),
) -> Result<(f64, f64), CoreError> {
    if values.len() != grid.len() {
        return Err(CoreError::shape(format!(
            "values length {} != grid length {}",
            values.len(),
            grid.len()
        )));
    }
    let (s, e) = window_indices(grid, window)?;
    let mut best = s;
    for i in s + 1..=e {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok((grid.points()[best], values[best]))
}

/// Peak of a smooth curve evaluated on `grid`, restricted to `window`.
pub fn find_peak(curve: &Curve, grid: &Grid, window: (f64, f64)) -> Result<(f64, f64), CoreError> {
    let values = curve.values_on(grid)?;
    find_peak_values(&values, grid, window)
}

/// No usable peak: the windowed values are flat, or the maximum sits on a
/// window edge (monotone inside the window, so a peak is undefined).
fn peak_is_degenerate(values: &[f64], s: usize, e: usize, best: usize) -> bool {
    let mut lo = values[s];
    let mut hi = values[s];
    for &v in &values[s..=e] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let flat = (hi - lo).abs() <= 1e-12 * hi.abs().max(1.0);
    flat || best == s || best == e
}

fn require_daily(grid: &Grid) -> Result<(), CoreError> {
    for (i, &p) in grid.points().iter().enumerate() {
        if p != i as f64 {
            return Err(CoreError::input(
                "registration needs a daily grid (points 0, 1, 2, ...)",
            ));
        }
    }
    Ok(())
}

/// How days vacated by a shift are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFill {
    /// Repeat the nearest in-domain value.
    Constant,
    /// Fill with zeros.
    Zero,
}

/// Shift a daily series by `shift` days (positive = left shift), filling
/// vacated days with the boundary value.
pub fn shift_series(values: &[f64], shift: i64) -> Vec<f64> {
    shift_series_with(values, shift, BoundaryFill::Constant)
}

pub fn shift_series_with(values: &[f64], shift: i64, fill: BoundaryFill) -> Vec<f64> {
    let n = values.len() as i64;
    (0..n)
        .map(|t| {
            let src = t + shift;
            if (0..n).contains(&src) {
                values[src as usize]
            } else {
                match fill {
                    BoundaryFill::Constant => values[src.clamp(0, n - 1) as usize],
                    BoundaryFill::Zero => 0.0,
                }
            }
        })
        .collect()
}

struct ShiftPlan {
    shifts: Vec<i64>,
    target: f64,
    peak_table: Vec<(f64, f64)>,
    flags: Vec<bool>,
}

fn plan_shifts(
    values: &Mat,
    grid: &Grid,
    window: (f64, f64),
) -> Result<ShiftPlan, CoreError> {
    let (s, e) = window_indices(grid, window)?;
    let n = values.nrows();
    let mut peak_table = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    let mut peak_days: Vec<Option<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = values.row(i);
        let mut best = s;
        for k in s + 1..=e {
            if row[k] > row[best] {
                best = k;
            }
        }
        let day = grid.points()[best];
        peak_table.push((day, row[best]));
        let degenerate = peak_is_degenerate(row, s, e, best);
        flags.push(degenerate);
        peak_days.push(if degenerate { None } else { Some(day) });
    }
    let target = peak_days
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, &d| m.min(d));
    if !target.is_finite() {
        return Err(CoreError::input(
            "no curve has a usable peak inside the window",
        ));
    }
    let shifts: Vec<i64> = peak_days
        .iter()
        .map(|d| match d {
            Some(day) => (day - target) as i64,
            None => 0,
        })
        .collect();
    Ok(ShiftPlan {
        shifts,
        target,
        peak_table,
        flags,
    })
}

fn shift_and_resmooth(
    set: &CurveSet,
    grid: &Grid,
    shifts: &[i64],
    lambdas: &[f64],
    fill: BoundaryFill,
) -> Result<(CurveSet, f64), CoreError> {
    let values = set.values_on(grid)?;
    let shifted: Vec<Vec<f64>> = (0..values.nrows())
        .map(|i| shift_series_with(values.row(i), shifts[i], fill))
        .collect();
    let smoother = Smoother::new(set.basis().clone(), grid)?;
    let coll = smoother.fit_collection(&shifted, lambdas)?;
    let nb = set.basis().n_basis();
    let mut coefs = Mat::zeros(set.n_curves(), nb);
    for (i, fit) in coll.fits.iter().enumerate() {
        coefs.row_mut(i).copy_from_slice(fit.curve.coefs());
    }
    let out = CurveSet::new(set.basis().clone(), set.units().to_vec(), coefs)?;
    Ok((out, coll.lambda))
}

/// Register a collection: find per-curve peaks in `window`, left-shift every
/// curve so its peak lands on the earliest peak day, fill vacated days by
/// constant extrapolation and re-smooth with a fresh shared GCV lambda.
pub fn align_and_integrate(
    curves: &CurveSet,
    grid: &Grid,
    window: (f64, f64),
    lambdas: &[f64],
) -> Result<RegistrationResult, CoreError> {
    align_and_integrate_with(curves, grid, window, lambdas, BoundaryFill::Constant)
}

pub fn align_and_integrate_with(
    curves: &CurveSet,
    grid: &Grid,
    window: (f64, f64),
    lambdas: &[f64],
    fill: BoundaryFill,
) -> Result<RegistrationResult, CoreError> {
    require_daily(grid)?;
    let values = curves.values_on(grid)?;
    let plan = plan_shifts(&values, grid, window)?;
    let (out, lambda) = shift_and_resmooth(curves, grid, &plan.shifts, lambdas, fill)?;
    Ok(RegistrationResult {
        shifts: plan.shifts,
        target_peak_day: plan.target,
        curves: out,
        peak_table: plan.peak_table,
        flags: plan.flags,
        lambda,
    })
}

/// Shift a companion collection by the unit-keyed shifts of a registration,
/// with identical boundary fill and re-smoothing.
pub fn apply_shifts(
    other: &CurveSet,
    grid: &Grid,
    shifts: &BTreeMap<String, i64>,
    lambdas: &[f64],
) -> Result<(CurveSet, f64), CoreError> {
    apply_shifts_with(other, grid, shifts, lambdas, BoundaryFill::Constant)
}

pub fn apply_shifts_with(
    other: &CurveSet,
    grid: &Grid,
    shifts: &BTreeMap<String, i64>,
    lambdas: &[f64],
    fill: BoundaryFill,
) -> Result<(CurveSet, f64), CoreError> {
    require_daily(grid)?;
    let missing: Vec<String> = other
        .units()
        .iter()
        .filter(|u| !shifts.contains_key(*u))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CoreError::KeyedJoin { missing });
    }
    let per_curve: Vec<i64> = other.units().iter().map(|u| shifts[u]).collect();
    shift_and_resmooth(other, grid, &per_curve, lambdas, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::BasisSystem;
    use crate::smoothing::default_lambda_grid;
    use alloc::sync::Arc;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn bump(t: f64, center: f64, width: f64, amp: f64) -> f64 {
        let z = (t - center) / width;
        amp * (-0.5 * z * z).exp()
    }

    fn smooth_set(series: &[Vec<f64>], grid: &Grid) -> CurveSet {
        let basis = Arc::new(BasisSystem::cubic(grid.last(), 21).unwrap());
        let smoother = Smoother::new(basis.clone(), grid).unwrap();
        let mut coefs = Mat::zeros(series.len(), basis.n_basis());
        for (i, y) in series.iter().enumerate() {
            let fit = smoother.fit(y, 1e-6).unwrap();
            coefs.row_mut(i).copy_from_slice(fit.curve.coefs());
        }
        let units = (0..series.len()).map(|i| format!("u{i:02}")).collect();
        CurveSet::new(basis, units, coefs).unwrap()
    }

    #[test]
    fn peak_of_unimodal_bump() {
        let grid = Grid::daily(150).unwrap();
        let y: Vec<f64> = grid.points().iter().map(|&t| bump(t, 40.0, 10.0, 1.0)).collect();
        let (day, val) = find_peak_values(&y, &grid, (10.0, 100.0)).unwrap();
        assert_eq!(day, 40.0);
        assert_abs_diff_eq!(val, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_window_maximum_is_ignored() {
        let grid = Grid::daily(150).unwrap();
        let y: Vec<f64> = grid
            .points()
            .iter()
            .map(|&t| bump(t, 8.0, 1.5, 3.0) + bump(t, 50.0, 6.0, 2.0))
            .collect();
        let (day, val) = find_peak_values(&y, &grid, (10.0, 100.0)).unwrap();
        assert_eq!(day, 50.0);
        assert_abs_diff_eq!(val, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn ties_break_toward_earlier_day() {
        let grid = Grid::daily(150).unwrap();
        let mut y = vec![0.0; 150];
        y[30] = 5.0;
        y[60] = 5.0;
        let (day, _) = find_peak_values(&y, &grid, (10.0, 100.0)).unwrap();
        assert_eq!(day, 30.0);
    }

    #[test]
    fn empty_window_is_rejected() {
        let grid = Grid::daily(150).unwrap();
        let y = vec![0.0; 150];
        assert!(find_peak_values(&y, &grid, (100.0, 10.0)).is_err());
        assert!(find_peak_values(&y, &grid, (40.2, 40.8)).is_err());
    }

    #[test]
    fn exact_shift_recovery() {
        let grid = Grid::daily(150).unwrap();
        let base: Vec<f64> = grid.points().iter().map(|&t| bump(t, 35.0, 9.0, 1.0)).collect();
        let delayed: Vec<f64> = grid.points().iter().map(|&t| bump(t, 42.0, 9.0, 1.0)).collect();
        let set = smooth_set(&[base, delayed], &grid);
        let reg = align_and_integrate(&set, &grid, (10.0, 100.0), &default_lambda_grid()).unwrap();
        assert_eq!(reg.shifts[1] - reg.shifts[0], 7);
        assert_eq!(reg.target_peak_day, 35.0);
        assert!(!reg.flags[0] && !reg.flags[1]);
        // aligned peaks land on the target within one grid step
        let vals = reg.curves.values_on(&grid).unwrap();
        for i in 0..2 {
            let (day, _) = find_peak_values(vals.row(i), &grid, (10.0, 100.0)).unwrap();
            assert!((day - reg.target_peak_day).abs() <= 1.0);
        }
    }

    #[test]
    fn identical_peaks_leave_curves_unchanged() {
        let grid = Grid::daily(150).unwrap();
        let series: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                grid.points()
                    .iter()
                    .map(|&t| bump(t, 40.0, 8.0 + k as f64, 1.0 + 0.2 * k as f64))
                    .collect()
            })
            .collect();
        let set = smooth_set(&series, &grid);
        let before = set.values_on(&grid).unwrap();
        let reg = align_and_integrate(&set, &grid, (10.0, 100.0), &default_lambda_grid()).unwrap();
        assert_eq!(reg.shifts, vec![0, 0, 0]);
        let after = reg.curves.values_on(&grid).unwrap();
        for i in 0..3 {
            for j in 0..grid.len() {
                assert_abs_diff_eq!(after[(i, j)], before[(i, j)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn flat_curve_is_flagged_with_zero_shift() {
        let grid = Grid::daily(150).unwrap();
        let flat = vec![0.3; 150];
        let bumped: Vec<f64> = grid.points().iter().map(|&t| bump(t, 45.0, 8.0, 1.0)).collect();
        let set = smooth_set(&[bumped, flat], &grid);
        let reg = align_and_integrate(&set, &grid, (10.0, 100.0), &default_lambda_grid()).unwrap();
        assert!(!reg.flags[0]);
        assert!(reg.flags[1]);
        assert_eq!(reg.shifts[1], 0);
    }

    #[test]
    fn monotone_curve_is_flagged() {
        let grid = Grid::daily(150).unwrap();
        let ramp: Vec<f64> = grid.points().iter().map(|&t| 0.01 * t).collect();
        let bumped: Vec<f64> = grid.points().iter().map(|&t| bump(t, 45.0, 8.0, 1.0)).collect();
        let set = smooth_set(&[bumped, ramp], &grid);
        let reg = align_and_integrate(&set, &grid, (10.0, 100.0), &default_lambda_grid()).unwrap();
        assert!(reg.flags[1]);
        assert_eq!(reg.shifts[1], 0);
    }

    #[test]
    fn shift_primitive_fills_boundaries() {
        let vals: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let left = shift_series(&vals, 3);
        assert_eq!(&left[..7], &[3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(&left[7..], &[9.0, 9.0, 9.0]);
        let right = shift_series(&vals, -2);
        assert_eq!(&right[..2], &[0.0, 0.0]);
        assert_eq!(&right[2..], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(shift_series(&vals, 0), vals);
        // zero fill leaves vacated days at 0 instead of the edge value
        let zleft = shift_series_with(&vals, 3, BoundaryFill::Zero);
        assert_eq!(&zleft[7..], &[0.0, 0.0, 0.0]);
        let zright = shift_series_with(&vals, -2, BoundaryFill::Zero);
        assert_eq!(&zright[..2], &[0.0, 0.0]);
        assert_eq!(&zright[2..], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn companion_collection_gets_same_shifts() {
        let grid = Grid::daily(150).unwrap();
        // mortality-like pair with a 5-day offset
        let m0: Vec<f64> = grid.points().iter().map(|&t| bump(t, 30.0, 8.0, 1.0)).collect();
        let m1: Vec<f64> = grid.points().iter().map(|&t| bump(t, 35.0, 8.0, 1.0)).collect();
        let morts = smooth_set(&[m0, m1], &grid);
        let reg = align_and_integrate(&morts, &grid, (10.0, 100.0), &default_lambda_grid()).unwrap();
        assert_eq!(reg.shifts, vec![0, 5]);
        // companion ramps
        let r0: Vec<f64> = grid.points().iter().map(|&t| 1.0 + 0.02 * t).collect();
        let r1 = r0.clone();
        let comp = smooth_set(&[r0.clone(), r1], &grid);
        let (shifted, _) = apply_shifts(&comp, &grid, &reg.shift_map(), &default_lambda_grid()).unwrap();
        let vals = shifted.values_on(&grid).unwrap();
        // unit u01 shifted left 5: value at day t equals original at t+5 away
        // from the filled tail
        for t in 0..130 {
            assert_abs_diff_eq!(vals[(1, t)], 1.0 + 0.02 * (t as f64 + 5.0), epsilon = 1e-3);
            assert_abs_diff_eq!(vals[(0, t)], 1.0 + 0.02 * t as f64, epsilon = 1e-3);
        }
    }

    #[test]
    fn missing_units_fail_the_join() {
        let grid = Grid::daily(150).unwrap();
        let r0: Vec<f64> = grid.points().iter().map(|&t| bump(t, 40.0, 9.0, 1.0)).collect();
        let comp = smooth_set(&[r0], &grid);
        let shifts = BTreeMap::new();
        let err = apply_shifts(&comp, &grid, &shifts, &default_lambda_grid()).unwrap_err();
        match err {
            CoreError::KeyedJoin { missing } => assert_eq!(missing, vec!["u00".to_string()]),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
