//! Preprocessing: missing-value imputation, wind vectorization, feature
//! normalization, station one-hot encoding, and chronological splits.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::ingest::{DailySeries, Feature};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("feature {0} has no observed values")]
    AllMissing(String),
    #[error("feature {0} has zero variance; cannot normalize")]
    DegenerateFeature(String),
    #[error("unknown wind direction {0:?}")]
    UnknownDirection(String),
    #[error("wind speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("unknown station {0:?}")]
    UnknownStation(String),
    #[error("series too short: {n} rows, need at least {min}")]
    TooShort { n: usize, min: usize },
    #[error("split fractions must be positive and sum to 1")]
    BadSplit,
    #[error("stats file: {0}")]
    StatsFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Missing-value strategies. Config key `impute` accepts
/// `mean | ffill_bfill | linear | seasonal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputationMethod {
    Mean,
    ForwardBackwardFill,
    LinearInterpolation,
    SeasonalInterpolation,
}

impl ImputationMethod {
    pub fn key(self) -> &'static str {
        match self {
            ImputationMethod::Mean => "mean",
            ImputationMethod::ForwardBackwardFill => "ffill_bfill",
            ImputationMethod::LinearInterpolation => "linear",
            ImputationMethod::SeasonalInterpolation => "seasonal",
        }
    }
}

impl FromStr for ImputationMethod {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(ImputationMethod::Mean),
            "ffill_bfill" => Ok(ImputationMethod::ForwardBackwardFill),
            "linear" => Ok(ImputationMethod::LinearInterpolation),
            "seasonal" => Ok(ImputationMethod::SeasonalInterpolation),
            other => Err(PreprocessError::StatsFormat(format!(
                "unknown imputation method {other:?} (expected mean|ffill_bfill|linear|seasonal)"
            ))),
        }
    }
}

/// Days per seasonal period used by [`ImputationMethod::SeasonalInterpolation`].
pub const SEASONAL_PERIOD: usize = 365;

fn impute_column(values: &mut [Option<f64>], method: ImputationMethod, name: &str) -> Result<(), PreprocessError> {
    let observed: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    if observed.is_empty() {
        return Err(PreprocessError::AllMissing(name.to_string()));
    }
    match method {
        ImputationMethod::Mean => {
            let mean = observed.iter().map(|(_, v)| v).sum::<f64>() / observed.len() as f64;
            for v in values.iter_mut() {
                if v.is_none() {
                    *v = Some(mean);
                }
            }
        }
        ImputationMethod::ForwardBackwardFill => {
            let mut last = None;
            for v in values.iter_mut() {
                match v {
                    Some(x) => last = Some(*x),
                    None => *v = last,
                }
            }
            let mut next = None;
            for v in values.iter_mut().rev() {
                match v {
                    Some(x) => next = Some(*x),
                    None => *v = next,
                }
            }
        }
        ImputationMethod::LinearInterpolation => {
            linear_fill(values, &observed);
        }
        ImputationMethod::SeasonalInterpolation => {
            // average the same calendar position one period back and forward,
            // using observed values only; anything unresolved falls back to
            // linear interpolation
            let snapshot: Vec<Option<f64>> = values.to_vec();
            for i in 0..values.len() {
                if values[i].is_some() {
                    continue;
                }
                let prev = i.checked_sub(SEASONAL_PERIOD).and_then(|j| snapshot[j]);
                let next = snapshot.get(i + SEASONAL_PERIOD).copied().flatten();
                values[i] = match (prev, next) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    (Some(a), None) => Some(a),
                    (None, Some(b)) => Some(b),
                    (None, None) => None,
                };
            }
            let observed_now: Vec<(usize, f64)> = values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|x| (i, x)))
                .collect();
            linear_fill(values, &observed_now);
        }
    }
    Ok(())
}

/// Straight-line fill between consecutive anchors; boundary gaps take the
/// nearest observed value (a line needs two anchors, the edges have one).
fn linear_fill(values: &mut [Option<f64>], observed: &[(usize, f64)]) {
    let (first_i, first_v) = observed[0];
    let (last_i, last_v) = *observed.last().unwrap();
    for v in values[..first_i].iter_mut() {
        *v = Some(first_v);
    }
    for v in values[last_i + 1..].iter_mut() {
        *v = Some(last_v);
    }
    for w in observed.windows(2) {
        let (i0, v0) = w[0];
        let (i1, v1) = w[1];
        if i1 - i0 <= 1 {
            continue;
        }
        let slope = (v1 - v0) / (i1 - i0) as f64;
        for i in i0 + 1..i1 {
            values[i] = Some(v0 + slope * (i - i0) as f64);
        }
    }
}

/// Fills every missing value of every included feature.
///
/// Observed values are never altered; afterwards no included feature has
/// missing entries. A feature with zero observations is an error.
pub fn impute(series: &DailySeries, method: ImputationMethod) -> Result<DailySeries, PreprocessError> {
    let mut out = series.clone();
    for &f in series.included() {
        impute_column(out.column_mut(f), method, f.name())?;
    }
    Ok(out)
}

const COMPASS_ROSE: [(&str, f64); 16] = [
    ("N", 0.0),
    ("NNE", 22.5),
    ("NE", 45.0),
    ("ENE", 67.5),
    ("E", 90.0),
    ("ESE", 112.5),
    ("SE", 135.0),
    ("SSE", 157.5),
    ("S", 180.0),
    ("SSW", 202.5),
    ("SW", 225.0),
    ("WSW", 247.5),
    ("W", 270.0),
    ("WNW", 292.5),
    ("NW", 315.0),
    ("NNW", 337.5),
];

/// Maps a 16-point compass label to degrees clockwise from north.
pub fn compass_to_degrees(label: &str) -> Option<f64> {
    let up = label.trim().to_uppercase();
    COMPASS_ROSE.iter().find(|(l, _)| *l == up).map(|(_, d)| *d)
}

/// Nearest 16-point compass label for an angle in degrees.
pub fn degrees_to_compass(deg: f64) -> &'static str {
    let d = deg.rem_euclid(360.0);
    let idx = ((d / 22.5).round() as usize) % 16;
    COMPASS_ROSE[idx].0
}

/// Converts (speed, direction) to the (wx, wy) wind vector.
///
/// The angle is measured clockwise from north (N = 0°, E = 90°), so
/// wx = speed·sin θ points east and wy = speed·cos θ points north; the
/// magnitude equals the speed.
pub fn wind_to_vector(speed: f64, direction_deg: f64) -> Result<(f64, f64), PreprocessError> {
    if speed < 0.0 {
        return Err(PreprocessError::NegativeSpeed(speed));
    }
    if !(0.0..360.0).contains(&direction_deg) {
        return Err(PreprocessError::UnknownDirection(format!("{direction_deg}°")));
    }
    let theta = direction_deg.to_radians();
    Ok((speed * theta.sin(), speed * theta.cos()))
}

/// Same as [`wind_to_vector`] but from a compass label.
pub fn wind_to_vector_compass(speed: f64, direction: &str) -> Result<(f64, f64), PreprocessError> {
    let deg = compass_to_degrees(direction)
        .ok_or_else(|| PreprocessError::UnknownDirection(direction.to_string()))?;
    wind_to_vector(speed, deg)
}

/// Per-feature mean and population standard deviation, fitted on the
/// training split only.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn index_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f == feature)
    }
}

/// Fits per-column stats (population σ, divide by n). Zero-variance
/// columns are rejected.
pub fn fit_normalizer(
    train: ArrayView2<f64>,
    feature_names: &[String],
) -> Result<NormalizationStats, PreprocessError> {
    if train.nrows() == 0 {
        return Err(PreprocessError::TooShort { n: 0, min: 1 });
    }
    assert_eq!(train.ncols(), feature_names.len(), "one name per column");
    let n = train.nrows() as f64;
    let mut mean = Vec::with_capacity(train.ncols());
    let mut std = Vec::with_capacity(train.ncols());
    for (j, name) in feature_names.iter().enumerate() {
        let col = train.index_axis(Axis(1), j);
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let sigma = var.sqrt();
        if sigma == 0.0 {
            return Err(PreprocessError::DegenerateFeature(name.clone()));
        }
        mean.push(mu);
        std.push(sigma);
    }
    Ok(NormalizationStats {
        features: feature_names.to_vec(),
        mean,
        std,
    })
}

/// x' = (x − μ)/σ column-wise.
pub fn normalize(matrix: ArrayView2<f64>, stats: &NormalizationStats) -> Array2<f64> {
    assert_eq!(matrix.ncols(), stats.features.len());
    let mut out = matrix.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| (v - stats.mean[j]) / stats.std[j]);
    }
    out
}

/// Inverse of [`normalize`].
pub fn denormalize(matrix: ArrayView2<f64>, stats: &NormalizationStats) -> Array2<f64> {
    assert_eq!(matrix.ncols(), stats.features.len());
    let mut out = matrix.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v * stats.std[j] + stats.mean[j]);
    }
    out
}

/// A combined multi-station table with one-hot station indicators.
#[derive(Debug, Clone)]
pub struct CombinedTable {
    /// Weather feature names followed by `station=<id>` indicator columns.
    pub columns: Vec<String>,
    pub data: Array2<f64>,
    /// Row ranges occupied by each station block, in input order.
    pub blocks: Vec<(String, std::ops::Range<usize>)>,
}

/// Stacks per-station feature blocks and appends one indicator column per
/// station (exactly one indicator is 1 in every row).
pub fn encode_station_onehot(
    stations: &[String],
    blocks: &[(String, Array2<f64>)],
) -> Result<CombinedTable, PreprocessError> {
    let n_feat = blocks.first().map(|(_, m)| m.ncols()).unwrap_or(0);
    let total_rows: usize = blocks.iter().map(|(_, m)| m.nrows()).sum();
    let n_cols = n_feat + stations.len();
    let mut data = Array2::zeros((total_rows, n_cols));
    let mut ranges = Vec::with_capacity(blocks.len());
    let mut row = 0;
    for (station, m) in blocks {
        assert_eq!(m.ncols(), n_feat, "all blocks must share the feature columns");
        let sidx = stations
            .iter()
            .position(|s| s == station)
            .ok_or_else(|| PreprocessError::UnknownStation(station.clone()))?;
        let r0 = row;
        for i in 0..m.nrows() {
            for j in 0..n_feat {
                data[[row, j]] = m[[i, j]];
            }
            data[[row, n_feat + sidx]] = 1.0;
            row += 1;
        }
        ranges.push((station.clone(), r0..row));
    }
    let mut columns: Vec<String> = Vec::with_capacity(n_cols);
    // weather feature names are supplied by the caller's block matrices;
    // keep canonical order here for the default four-feature case
    for f in Feature::ALL.iter().take(n_feat) {
        columns.push(f.name().to_string());
    }
    while columns.len() < n_feat {
        columns.push(format!("f{}", columns.len()));
    }
    for s in stations {
        columns.push(format!("station={s}"));
    }
    Ok(CombinedTable {
        columns,
        data,
        blocks: ranges,
    })
}

/// Chronological 70/20/10 split fractions. Never shuffled.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.70,
            val_fraction: 0.20,
            test_fraction: 0.10,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        let positive =
            self.train_fraction > 0.0 && self.val_fraction > 0.0 && self.test_fraction > 0.0;
        if !positive || (sum - 1.0).abs() > 1e-9 {
            return Err(PreprocessError::BadSplit);
        }
        Ok(())
    }
}

fn floor_fraction(n: usize, frac: f64) -> usize {
    // ⌊frac·n⌋ with protection against values like 0.7·10 landing at
    // 6.999999999999999 in floating point
    let x = frac * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-6 {
        r as usize
    } else {
        x.floor() as usize
    }
}

/// Index ranges of the chronological (train, val, test) segments:
/// ⌊train·n⌋ rows, then ⌊val·n⌋ rows, remainder to test.
pub fn split_ranges(
    n: usize,
    spec: &SplitSpec,
) -> Result<[std::ops::Range<usize>; 3], PreprocessError> {
    spec.validate()?;
    if n < 10 {
        return Err(PreprocessError::TooShort { n, min: 10 });
    }
    let n_train = floor_fraction(n, spec.train_fraction);
    let n_val = floor_fraction(n, spec.val_fraction);
    Ok([0..n_train, n_train..n_train + n_val, n_train + n_val..n])
}

/// Splits a matrix into owned (train, val, test) pieces.
pub fn split_matrix(
    matrix: ArrayView2<f64>,
    spec: &SplitSpec,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>), PreprocessError> {
    let [tr, va, te] = split_ranges(matrix.nrows(), spec)?;
    Ok((
        matrix.slice(ndarray::s![tr, ..]).to_owned(),
        matrix.slice(ndarray::s![va, ..]).to_owned(),
        matrix.slice(ndarray::s![te, ..]).to_owned(),
    ))
}

/// Writes normalization stats as a versioned key-value text file.
pub fn write_stats_file(stats: &NormalizationStats, station: &str) -> String {
    let mut out = String::new();
    out.push_str("version=1\n");
    out.push_str(&format!("station={station}\n"));
    out.push_str(&format!("features={}\n", stats.features.join(",")));
    for (j, f) in stats.features.iter().enumerate() {
        out.push_str(&format!("{f}.mean={}\n", stats.mean[j]));
        out.push_str(&format!("{f}.std={}\n", stats.std[j]));
    }
    out
}

/// Parses the key-value stats file; returns (station, stats).
pub fn parse_stats_file(text: &str) -> Result<(String, NormalizationStats), PreprocessError> {
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PreprocessError::StatsFormat(format!("expected key=value, got {line:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    match kv.get("version").map(String::as_str) {
        Some("1") => {}
        other => {
            return Err(PreprocessError::StatsFormat(format!(
                "unsupported stats version {other:?}"
            )))
        }
    }
    let station = kv
        .get("station")
        .ok_or_else(|| PreprocessError::StatsFormat("missing station".into()))?
        .clone();
    let features: Vec<String> = kv
        .get("features")
        .ok_or_else(|| PreprocessError::StatsFormat("missing features".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for f in &features {
        let get = |suffix: &str| -> Result<f64, PreprocessError> {
            kv.get(&format!("{f}.{suffix}"))
                .ok_or_else(|| PreprocessError::StatsFormat(format!("missing {f}.{suffix}")))?
                .parse()
                .map_err(|_| PreprocessError::StatsFormat(format!("bad {f}.{suffix}")))
        };
        mean.push(get("mean")?);
        std.push(get("std")?);
    }
    Ok((station, NormalizationStats { features, mean, std }))
}

pub fn save_stats(stats: &NormalizationStats, station: &str, path: &Path) -> Result<(), PreprocessError> {
    std::fs::write(path, write_stats_file(stats, station)).map_err(|source| PreprocessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_stats(path: &Path) -> Result<(String, NormalizationStats), PreprocessError> {
    let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_stats_file(&text)
}
