//! Shared pipeline plumbing for the subcommands: artifact paths, the
//! knowledge base, and the normalized split files.

use std::path::{Path, PathBuf};

use agrocast_core::advisor::{ClimateThresholds, CropTable, HazardRegistry};
use agrocast_core::config::RunConfig;
use agrocast_core::geo::StationRegistry;
use agrocast_core::ingest::{read_canonical_csv, DailySeries, Feature, StationAliases};
use agrocast_core::preprocess::NormalizationStats;
use anyhow::{anyhow, Context, Result};
use chrono::NaiveDate;
use ndarray::Array2;

/// Exit-code classes, one per error family (documented in the README).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Config = 2,
    MissingArtifact = 3,
    Data = 4,
    Compute = 5,
    Io = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub class: ExitClass,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(class: ExitClass, source: anyhow::Error) -> CliError {
        CliError { class, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Classify<T> {
    fn class(self, class: ExitClass) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn class(self, class: ExitClass) -> CliResult<T> {
        self.map_err(|e| CliError::new(class, e.into()))
    }
}

/// Knowledge-base tables, from `kb_dir` when set or the bundled copies.
pub struct KnowledgeBase {
    pub stations: StationRegistry,
    pub aliases: StationAliases,
    pub hazards: HazardRegistry,
    pub thresholds: ClimateThresholds,
    pub crops: CropTable,
}

impl KnowledgeBase {
    pub fn load(cfg: &RunConfig) -> CliResult<KnowledgeBase> {
        match &cfg.kb_dir {
            None => Ok(KnowledgeBase {
                stations: StationRegistry::bundled(),
                aliases: StationAliases::bundled(),
                hazards: HazardRegistry::bundled(),
                thresholds: ClimateThresholds::bundled(),
                crops: CropTable::bundled(),
            }),
            Some(dir) => Ok(KnowledgeBase {
                stations: StationRegistry::load(&dir.join("stations.csv")).class(ExitClass::Data)?,
                aliases: StationAliases::load(&dir.join("aliases.csv")).class(ExitClass::Data)?,
                hazards: HazardRegistry::load(&dir.join("hazards.csv")).class(ExitClass::Data)?,
                thresholds: ClimateThresholds::load(&dir.join("thresholds.csv"))
                    .class(ExitClass::Data)?,
                crops: CropTable::load(&dir.join("crops.txt")).class(ExitClass::Data)?,
            }),
        }
    }
}

pub fn canonical_dir(cfg: &RunConfig) -> PathBuf {
    cfg.work_dir.join("canonical")
}

pub fn stats_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.work_dir.join("stats").join(format!("{name}.stats"))
}

pub fn splits_dir(cfg: &RunConfig) -> PathBuf {
    cfg.work_dir.join("splits")
}

pub fn split_path(cfg: &RunConfig, name: &str, split: &str) -> PathBuf {
    splits_dir(cfg).join(format!("{name}.{split}.csv"))
}

pub fn bundle_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.model_dir.join(format!("{name}.agcm"))
}

pub fn history_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.model_dir.join(format!("{name}.history.csv"))
}

pub fn reports_dir(cfg: &RunConfig) -> PathBuf {
    cfg.work_dir.join("reports")
}

/// Stations with a canonical CSV present, honoring the config selection.
pub fn selected_stations(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let dir = canonical_dir(cfg);
    if !dir.exists() {
        return Err(CliError::new(
            ExitClass::MissingArtifact,
            anyhow!("{} not found; run `agrocast ingest` first", dir.display()),
        ));
    }
    let mut found: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(&dir).class(ExitClass::Io)? {
        let entry = entry.class(ExitClass::Io)?;
        let path = entry.path();
        if path.extension().map(|e| e == "csv").unwrap_or(false) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                found.push(stem.to_string());
            }
        }
    }
    found.sort();
    if cfg.stations.is_empty() {
        if found.is_empty() {
            return Err(CliError::new(
                ExitClass::MissingArtifact,
                anyhow!("no canonical station files under {}", dir.display()),
            ));
        }
        return Ok(found);
    }
    for want in &cfg.stations {
        if !found.contains(want) {
            return Err(CliError::new(
                ExitClass::MissingArtifact,
                anyhow!("station {want:?} has no canonical file under {}", dir.display()),
            ));
        }
    }
    Ok(cfg.stations.clone())
}

pub fn load_canonical(cfg: &RunConfig, station: &str) -> CliResult<DailySeries> {
    let path = canonical_dir(cfg).join(format!("{station}.csv"));
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))
        .class(ExitClass::MissingArtifact)?;
    read_canonical_csv(&text).class(ExitClass::Data)
}

/// Writes one normalized split as `date,<columns...>` CSV.
pub fn write_split_csv(
    path: &Path,
    dates: &[NaiveDate],
    columns: &[String],
    data: ndarray::ArrayView2<f64>,
) -> CliResult<()> {
    assert_eq!(dates.len(), data.nrows());
    let mut out = String::with_capacity(data.nrows() * 32);
    out.push_str("date,");
    out.push_str(&columns.join(","));
    out.push('\n');
    for (i, date) in dates.iter().enumerate() {
        out.push_str(&date.format("%Y-%m-%d").to_string());
        for j in 0..data.ncols() {
            out.push(',');
            out.push_str(&format!("{}", data[[i, j]]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .with_context(|| format!("writing {}", path.display()))
        .class(ExitClass::Io)
}

/// Reads a normalized split back as (dates, columns, matrix).
pub fn read_split_csv(path: &Path) -> CliResult<(Vec<NaiveDate>, Vec<String>, Array2<f64>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {} (run `agrocast preprocess` first)", path.display()))
        .class(ExitClass::MissingArtifact)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| {
        CliError::new(ExitClass::Data, anyhow!("{}: empty split file", path.display()))
    })?;
    let columns: Vec<String> = header
        .split(',')
        .skip(1)
        .map(|s| s.to_string())
        .collect();
    let mut dates = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let date = parts
            .next()
            .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
            .ok_or_else(|| {
                CliError::new(
                    ExitClass::Data,
                    anyhow!("{}:{}: bad date", path.display(), i + 2),
                )
            })?;
        dates.push(date);
        for p in parts {
            values.push(p.parse().map_err(|_| {
                CliError::new(
                    ExitClass::Data,
                    anyhow!("{}:{}: bad value {p:?}", path.display(), i + 2),
                )
            })?);
        }
    }
    let ncols = columns.len();
    let nrows = dates.len();
    if values.len() != nrows * ncols {
        return Err(CliError::new(
            ExitClass::Data,
            anyhow!("{}: ragged rows", path.display()),
        ));
    }
    let matrix = Array2::from_shape_vec((nrows, ncols), values).expect("shape checked");
    Ok((dates, columns, matrix))
}

/// Feature names for the configured feature set.
pub fn feature_names(features: &[Feature]) -> Vec<String> {
    features.iter().map(|f| f.name().to_string()).collect()
}

/// Positions of the forecast targets among `columns`.
pub fn target_columns(columns: &[String]) -> Vec<usize> {
    ["rainfall", "sunshine", "humidity", "temperature"]
        .iter()
        .filter_map(|t| columns.iter().position(|c| c == t))
        .collect()
}

pub fn load_stats(cfg: &RunConfig, name: &str) -> CliResult<NormalizationStats> {
    let path = stats_path(cfg, name);
    agrocast_core::preprocess::load_stats(&path)
        .map(|(_, s)| s)
        .with_context(|| format!("reading {} (run `agrocast preprocess` first)", path.display()))
        .class(ExitClass::MissingArtifact)
}
