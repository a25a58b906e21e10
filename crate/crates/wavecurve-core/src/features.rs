//! Scalar features derived from curves and raw counts: differential
//! mortality, restriction-split areas, peak ranks, lags, the cluster group
//! dummy and source-consistency ratios.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::curve::Curve;
use crate::error::CoreError;
#[cfg(not(feature = "std"))]
use crate::math::F64Math;

/// Daily differential mortality per 100,000 inhabitants:
/// `(deaths_t - baseline_t) / population * 1e5`.
pub fn differential_mortality(
    daily_deaths: &[f64],
    baseline: &[f64],
    population: f64,
) -> Result<Vec<f64>, CoreError> {
    if daily_deaths.len() != baseline.len() {
        return Err(CoreError::shape(format!(
            "deaths length {} != baseline length {}",
            daily_deaths.len(),
            baseline.len()
        )));
    }
    if !(population > 0.0) || !population.is_finite() {
        return Err(CoreError::input(format!(
            "population must be positive, got {population}"
        )));
    }
    for (i, (&d, &b)) in daily_deaths.iter().zip(baseline).enumerate() {
        if d < 0.0 || b < 0.0 || !d.is_finite() || !b.is_finite() {
            return Err(CoreError::input(format!(
                "negative or non-finite count at day {i}: deaths {d}, baseline {b}"
            )));
        }
    }
    Ok(daily_deaths
        .iter()
        .zip(baseline)
        .map(|(&d, &b)| (d - b) / population * 1e5)
        .collect())
}

/// Signed areas under a curve on either side of the restriction day.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaFeatures {
    pub a_bef: f64,
    pub a_aft: f64,
    /// Natural logs, present only when both areas are positive.
    pub log_a_bef: Option<f64>,
    pub log_a_aft: Option<f64>,
    pub positivity_flag: bool,
}

/// Trapezoid integral of `curve` over `[a, b]` on `n` equal subintervals.
fn segment_integral(curve: &Curve, a: f64, b: f64, n: usize) -> Result<f64, CoreError> {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (curve.eval(a)? + curve.eval(b)?);
    for k in 1..n {
        acc += curve.eval(a + h * k as f64)?;
    }
    Ok(acc * h)
}

/// Split the signed area under `curve` at the restriction day.
///
/// Both segments share the exact split point, so `a_bef + a_aft` is the
/// whole-domain integral by construction; `refine_per_day` controls the
/// quadrature density.
pub fn area_split(
    curve: &Curve,
    restriction: f64,
    refine_per_day: usize,
) -> Result<AreaFeatures, CoreError> {
    let (lo, hi) = curve.basis().domain();
    if !(restriction > lo && restriction < hi) {
        return Err(CoreError::input(format!(
            "restriction day {restriction} not strictly inside [{lo}, {hi}]"
        )));
    }
    let refine = refine_per_day.max(1);
    let cells = |a: f64, b: f64| (((b - a) * refine as f64).ceil() as usize).max(4);
    let a_bef = segment_integral(curve, lo, restriction, cells(lo, restriction))?;
    let a_aft = segment_integral(curve, restriction, hi, cells(restriction, hi))?;
    let positivity_flag = a_bef > 0.0 && a_aft > 0.0;
    Ok(AreaFeatures {
        a_bef,
        a_aft,
        log_a_bef: positivity_flag.then(|| a_bef.ln()),
        log_a_aft: positivity_flag.then(|| a_aft.ln()),
        positivity_flag,
    })
}

/// Ascending 1-based ranks with ties shared as the average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Per-unit peak rank movement between two waves: `rank_w2 - rank_w1`, ranks
/// ascending by peak value with ties averaged.
pub fn peak_rank_diff(
    peaks_w1: &BTreeMap<String, f64>,
    peaks_w2: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, (f64, f64, f64)>, CoreError> {
    let keys1: BTreeSet<&String> = peaks_w1.keys().collect();
    let keys2: BTreeSet<&String> = peaks_w2.keys().collect();
    if keys1 != keys2 {
        let missing: Vec<String> = keys1
            .symmetric_difference(&keys2)
            .map(|s| (*s).clone())
            .collect();
        return Err(CoreError::KeyedJoin { missing });
    }
    let units: Vec<&String> = peaks_w1.keys().collect();
    let v1: Vec<f64> = units.iter().map(|u| peaks_w1[*u]).collect();
    let v2: Vec<f64> = units.iter().map(|u| peaks_w2[*u]).collect();
    let r1 = average_ranks(&v1);
    let r2 = average_ranks(&v2);
    Ok(units
        .into_iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), (r1[i], r2[i], r2[i] - r1[i])))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagRecord {
    pub unit: String,
    /// Days from the restriction to the mortality peak (positive = after).
    pub lag: i64,
    pub peak_value: f64,
}

/// Lags between the restriction day and each unit's unshifted peak day.
pub fn compute_lags(
    units: &[String],
    peak_table: &[(f64, f64)],
    restriction: f64,
) -> Result<Vec<LagRecord>, CoreError> {
    if units.len() != peak_table.len() {
        return Err(CoreError::shape("one peak per unit required"));
    }
    Ok(units
        .iter()
        .zip(peak_table)
        .map(|(u, &(day, value))| LagRecord {
            unit: u.clone(),
            lag: (day - restriction).round() as i64,
            peak_value: value,
        })
        .collect())
}

/// Binary group dummy: 1 for every cluster except the mildest one.
pub fn group_dummy(labels: &[usize], rank_of_label: &[usize]) -> Result<Vec<u8>, CoreError> {
    labels
        .iter()
        .map(|&l| {
            rank_of_label
                .get(l)
                .map(|&r| u8::from(r >= 1))
                .ok_or_else(|| CoreError::input(format!("unknown cluster label {l}")))
        })
        .collect()
}

/// One row of a source-consistency comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioEntry {
    pub key: String,
    pub numerator: f64,
    pub denominator: f64,
    /// Absent when the denominator is zero; such rows are flagged, not fatal.
    pub ratio: Option<f64>,
}

/// Keyed ratio table between two total series (e.g. aggregated province
/// counts vs the regional figure).
pub fn source_ratio_report(
    series_a: &BTreeMap<String, f64>,
    series_b: &BTreeMap<String, f64>,
) -> Result<Vec<RatioEntry>, CoreError> {
    let keys1: BTreeSet<&String> = series_a.keys().collect();
    let keys2: BTreeSet<&String> = series_b.keys().collect();
    if keys1 != keys2 {
        let missing: Vec<String> = keys1
            .symmetric_difference(&keys2)
            .map(|s| (*s).clone())
            .collect();
        return Err(CoreError::KeyedJoin { missing });
    }
    Ok(series_a
        .iter()
        .map(|(k, &a)| {
            let b = series_b[k];
            RatioEntry {
                key: k.clone(),
                numerator: a,
                denominator: b,
                ratio: (b != 0.0).then(|| a / b),
            }
        })
        .collect())
}
