//! Run configuration: TOML schema, date handling, and validation. Every
//! numeric default matches the analysis as published; the seed has no
//! default on purpose.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::AppError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    input: RawInput,
    output: RawOutput,
    #[serde(rename = "wave")]
    waves: Vec<RawWave>,
    #[serde(default)]
    smoothing: RawSmoothing,
    #[serde(default)]
    model: RawModel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    deaths: String,
    baseline: String,
    population: String,
    mobility: String,
    covariates: String,
    comparison: Option<RawComparison>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComparison {
    regions: String,
    cases_province: Option<String>,
    cases_region: Option<String>,
    deaths_province: Option<String>,
    deaths_region: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWave {
    id: String,
    start: String,
    end: String,
    restriction: String,
    /// Peak-search window as day offsets from the wave start, inclusive.
    window: [i64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSmoothing {
    n_breakpoints: usize,
    lambda_min: f64,
    lambda_max: f64,
    lambda_grid_size: usize,
}

impl Default for RawSmoothing {
    fn default() -> Self {
        RawSmoothing {
            n_breakpoints: 21,
            lambda_min: 1e-6,
            lambda_max: 1e6,
            lambda_grid_size: 41,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawModel {
    path_grid_size: usize,
    lambda2_ratio: f64,
    cv_folds: usize,
    stability_runs: usize,
    stability_subsample: Option<[usize; 2]>,
    /// Inclusive lag range in days.
    lags: [usize; 2],
    areas_use_registered: bool,
    boundary_fill: String,
    quadrature_refine: usize,
    k_max: usize,
    hartigan_threshold: f64,
}

impl Default for RawModel {
    fn default() -> Self {
        RawModel {
            path_grid_size: 100,
            lambda2_ratio: 0.6,
            cv_folds: 5,
            stability_runs: 500,
            stability_subsample: None,
            lags: [15, 24],
            areas_use_registered: false,
            boundary_fill: "constant".to_string(),
            quadrature_refine: 128,
            k_max: 10,
            hartigan_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveConfig {
    pub id: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub restriction: NaiveDate,
    pub window: (f64, f64),
    pub n_days: usize,
}

impl WaveConfig {
    pub fn restriction_offset(&self) -> f64 {
        (self.restriction - self.start).num_days() as f64
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonPaths {
    pub regions: PathBuf,
    pub cases: Option<(PathBuf, PathBuf)>,
    pub deaths: Option<(PathBuf, PathBuf)>,
}

#[derive(Debug, Clone)]
pub struct InputPaths {
    pub deaths: PathBuf,
    pub baseline: PathBuf,
    pub population: PathBuf,
    pub mobility: PathBuf,
    pub covariates: PathBuf,
    pub comparison: Option<ComparisonPaths>,
}

#[derive(Debug, Clone)]
pub struct SmoothingConfig {
    pub n_breakpoints: usize,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub path_grid_size: usize,
    pub lambda2_ratio: f64,
    pub cv_folds: usize,
    pub stability_runs: usize,
    pub stability_subsample: Option<(usize, usize)>,
    pub lags: Vec<usize>,
    pub areas_use_registered: bool,
    pub boundary_fill: wavecurve_core::registration::BoundaryFill,
    pub quadrature_refine: usize,
    pub k_max: usize,
    pub hartigan_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputPaths,
    pub out_dir: PathBuf,
    pub waves: Vec<WaveConfig>,
    pub smoothing: SmoothingConfig,
    pub model: ModelConfig,
    /// Raw bytes of the config file, hashed into the manifest.
    pub raw_bytes: Vec<u8>,
}

fn parse_date(field: &str, value: &str) -> Result<NaiveDate, AppError> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map_err(|e| AppError::validation(format!("{field}: bad ISO date {value:?} ({e})")))
}

fn log_spaced(min: f64, max: f64, size: usize) -> Vec<f64> {
    let (l0, l1) = (min.log10(), max.log10());
    (0..size)
        .map(|i| {
            let f = if size == 1 {
                0.0
            } else {
                i as f64 / (size - 1) as f64
            };
            10f64.powf(l0 + f * (l1 - l0))
        })
        .collect()
}

pub fn load(path: &Path) -> Result<RunConfig, AppError> {
    let raw_bytes = std::fs::read(path)
        .map_err(|e| AppError::validation(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw_bytes)
        .map_err(|_| AppError::validation("config is not valid UTF-8"))?;
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| AppError::validation(format!("config parse error: {e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> PathBuf {
        let pb = PathBuf::from(p);
        if pb.is_absolute() {
            pb
        } else {
            base.join(pb)
        }
    };

    if raw.waves.is_empty() {
        return Err(AppError::validation("at least one [[wave]] is required"));
    }
    let n_breaks = raw.smoothing.n_breakpoints;
    if n_breaks < 4 {
        return Err(AppError::validation("smoothing.n_breakpoints must be >= 4"));
    }
    if !(raw.smoothing.lambda_min > 0.0 && raw.smoothing.lambda_max >= raw.smoothing.lambda_min) {
        return Err(AppError::validation(
            "smoothing lambda range must satisfy 0 < lambda_min <= lambda_max",
        ));
    }
    if raw.smoothing.lambda_grid_size < 2 {
        return Err(AppError::validation("smoothing.lambda_grid_size must be >= 2"));
    }

    let mut waves = Vec::with_capacity(raw.waves.len());
    let mut seen_ids = std::collections::BTreeSet::new();
    for w in &raw.waves {
        if w.id.is_empty()
            || !w
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(AppError::validation(format!(
                "wave id {:?} must be nonempty and use only [A-Za-z0-9_-]",
                w.id
            )));
        }
        if !seen_ids.insert(w.id.clone()) {
            return Err(AppError::validation(format!("duplicate wave id {:?}", w.id)));
        }
        let start = parse_date(&format!("wave {} start", w.id), &w.start)?;
        let end = parse_date(&format!("wave {} end", w.id), &w.end)?;
        let restriction = parse_date(&format!("wave {} restriction", w.id), &w.restriction)?;
        if end <= start {
            return Err(AppError::validation(format!(
                "wave {}: end must be after start",
                w.id
            )));
        }
        let n_days = (end - start).num_days() as usize + 1;
        if n_days < n_breaks + 2 {
            return Err(AppError::validation(format!(
                "wave {}: {n_days} days cannot support {n_breaks} breakpoints",
                w.id
            )));
        }
        if !(restriction > start && restriction < end) {
            return Err(AppError::validation(format!(
                "wave {}: restriction must lie strictly inside the wave",
                w.id
            )));
        }
        let [w0, w1] = w.window;
        if !(0 <= w0 && w0 < w1 && (w1 as usize) < n_days) {
            return Err(AppError::validation(format!(
                "wave {}: window [{w0}, {w1}] must satisfy 0 <= start < end <= {}",
                w.id,
                n_days - 1
            )));
        }
        waves.push(WaveConfig {
            id: w.id.clone(),
            start,
            end,
            restriction,
            window: (w0 as f64, w1 as f64),
            n_days,
        });
    }

    let m = &raw.model;
    if m.path_grid_size < 2 {
        return Err(AppError::validation("model.path_grid_size must be >= 2"));
    }
    if !(m.lambda2_ratio >= 0.0 && m.lambda2_ratio.is_finite()) {
        return Err(AppError::validation("model.lambda2_ratio must be finite and >= 0"));
    }
    if m.cv_folds < 2 {
        return Err(AppError::validation("model.cv_folds must be >= 2"));
    }
    if m.stability_runs == 0 {
        return Err(AppError::validation("model.stability_runs must be >= 1"));
    }
    if let Some([lo, hi]) = m.stability_subsample {
        if lo == 0 || lo > hi {
            return Err(AppError::validation(
                "model.stability_subsample must satisfy 1 <= lo <= hi",
            ));
        }
    }
    let [lag_lo, lag_hi] = m.lags;
    if lag_lo > lag_hi {
        return Err(AppError::validation("model.lags must satisfy lo <= hi"));
    }
    for w in &waves {
        if w.n_days <= lag_hi || w.n_days - lag_hi < n_breaks + 2 {
            return Err(AppError::validation(format!(
                "wave {}: lag {lag_hi} leaves too short a domain for coefficient smoothing",
                w.id
            )));
        }
    }
    let boundary_fill = match m.boundary_fill.as_str() {
        "constant" => wavecurve_core::registration::BoundaryFill::Constant,
        "zero" => wavecurve_core::registration::BoundaryFill::Zero,
        other => {
            return Err(AppError::validation(format!(
                "model.boundary_fill must be \"constant\" or \"zero\", got {other:?}"
            )))
        }
    };
    if m.quadrature_refine == 0 {
        return Err(AppError::validation("model.quadrature_refine must be >= 1"));
    }
    if m.k_max == 0 {
        return Err(AppError::validation("model.k_max must be >= 1"));
    }
    if !m.hartigan_threshold.is_finite() {
        return Err(AppError::validation("model.hartigan_threshold must be finite"));
    }

    let comparison = match &raw.input.comparison {
        None => None,
        Some(c) => {
            let pair = |a: &Option<String>, b: &Option<String>, what: &str| match (a, b) {
                (None, None) => Ok(None),
                (Some(p), Some(r)) => Ok(Some((resolve(p), resolve(r)))),
                _ => Err(AppError::validation(format!(
                    "comparison {what}: province and region files must be given together"
                ))),
            };
            let cases = pair(&c.cases_province, &c.cases_region, "cases")?;
            let deaths = pair(&c.deaths_province, &c.deaths_region, "deaths")?;
            if cases.is_none() && deaths.is_none() {
                return Err(AppError::validation(
                    "comparison block needs at least one cases or deaths file pair",
                ));
            }
            Some(ComparisonPaths {
                regions: resolve(&c.regions),
                cases,
                deaths,
            })
        }
    };

    Ok(RunConfig {
        seed: raw.seed,
        input: InputPaths {
            deaths: resolve(&raw.input.deaths),
            baseline: resolve(&raw.input.baseline),
            population: resolve(&raw.input.population),
            mobility: resolve(&raw.input.mobility),
            covariates: resolve(&raw.input.covariates),
            comparison,
        },
        out_dir: resolve(&raw.output.dir),
        waves,
        smoothing: SmoothingConfig {
            n_breakpoints: n_breaks,
            lambdas: log_spaced(
                raw.smoothing.lambda_min,
                raw.smoothing.lambda_max,
                raw.smoothing.lambda_grid_size,
            ),
        },
        model: ModelConfig {
            path_grid_size: m.path_grid_size,
            lambda2_ratio: m.lambda2_ratio,
            cv_folds: m.cv_folds,
            stability_runs: m.stability_runs,
            stability_subsample: m.stability_subsample.map(|[a, b]| (a, b)),
            lags: (lag_lo..=lag_hi).collect(),
            areas_use_registered: m.areas_use_registered,
            boundary_fill,
            quadrature_refine: m.quadrature_refine,
            k_max: m.k_max,
            hartigan_threshold: m.hartigan_threshold,
        },
        raw_bytes,
    })
}

/// Default stability subsample range: the published setup draws 90..=107 from
/// 107 units; anything else subsamples between 85% and all of the units.
pub fn default_subsample_range(n_units: usize) -> (usize, usize) {
    if n_units == 107 {
        (90, 107)
    } else {
        ((((n_units as f64) * 0.85).ceil() as usize).max(1), n_units)
    }
}
