//! Rule-based agricultural advisories: cropping seasons, hazard zones,
//! monthly climate thresholds, forecast aggregation, and the decision
//! rules that turn a forecast into warnings and crop suggestions.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error("empty forecast")]
    EmptyForecast,
    #[error("forecast must cover at least one full calendar month")]
    InsufficientForecast,
    #[error("knowledge base {file}: {msg}")]
    KbFormat { file: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Cropping seasons. Mid-month boundaries fall on the 16th:
/// Rabi Nov 16 – Mar 15, Kharif-1 Mar 16 – Jul 15, Kharif-2 Jul 16 – Nov 15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum Season {
    Rabi,
    Kharif1,
    Kharif2,
}

impl Season {
    pub fn name(self) -> &'static str {
        match self {
            Season::Rabi => "Rabi",
            Season::Kharif1 => "Kharif-1",
            Season::Kharif2 => "Kharif-2",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Season::Rabi => "rabi",
            Season::Kharif1 => "kharif1",
            Season::Kharif2 => "kharif2",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Season containing a date; the three ranges partition the year.
pub fn current_season(date: NaiveDate) -> Season {
    let md = (date.month(), date.day());
    if md >= (11, 16) || md < (3, 16) {
        Season::Rabi
    } else if md < (7, 16) {
        Season::Kharif1
    } else {
        Season::Kharif2
    }
}

/// First and last day of the season instance containing `date`.
pub fn season_bounds(date: NaiveDate) -> (NaiveDate, NaiveDate) {
    let y = date.year();
    let d = |y: i32, m: u32, d: u32| NaiveDate::from_ymd_opt(y, m, d).unwrap();
    match current_season(date) {
        Season::Kharif1 => (d(y, 3, 16), d(y, 7, 15)),
        Season::Kharif2 => (d(y, 7, 16), d(y, 11, 15)),
        Season::Rabi => {
            if date.month() >= 11 {
                (d(y, 11, 16), d(y + 1, 3, 15))
            } else {
                (d(y - 1, 11, 16), d(y, 3, 15))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum DroughtSeverity {
    None,
    Moderate,
    Severe,
    VerySevere,
}

impl DroughtSeverity {
    pub fn key(self) -> &'static str {
        match self {
            DroughtSeverity::None => "none",
            DroughtSeverity::Moderate => "moderate",
            DroughtSeverity::Severe => "severe",
            DroughtSeverity::VerySevere => "very_severe",
        }
    }
}

impl FromStr for DroughtSeverity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(DroughtSeverity::None),
            "moderate" => Ok(DroughtSeverity::Moderate),
            "severe" => Ok(DroughtSeverity::Severe),
            "very_severe" => Ok(DroughtSeverity::VerySevere),
            other => Err(format!("unknown drought severity {other:?}")),
        }
    }
}

/// Hazard registry row for a district.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HazardZone {
    pub district: String,
    pub drought_severity: DroughtSeverity,
    pub flood_prone: bool,
}

impl HazardZone {
    pub fn all_clear(district: &str) -> HazardZone {
        HazardZone {
            district: district.to_string(),
            drought_severity: DroughtSeverity::None,
            flood_prone: false,
        }
    }
}

/// District → hazard map loaded from `district,drought_severity,flood_prone`.
#[derive(Debug, Clone)]
pub struct HazardRegistry {
    map: BTreeMap<String, HazardZone>,
}

impl HazardRegistry {
    pub fn bundled() -> HazardRegistry {
        HazardRegistry::parse(include_str!("../../../data/kb/hazards.csv"))
            .expect("bundled hazard registry is well-formed")
    }

    pub fn parse(text: &str) -> Result<HazardRegistry, AdvisorError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("district,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(AdvisorError::KbFormat {
                    file: "hazards".into(),
                    msg: format!("line {}: expected 3 fields, got {line:?}", i + 1),
                });
            }
            let district = parts[0].trim().to_string();
            let severity = parts[1].parse().map_err(|e| AdvisorError::KbFormat {
                file: "hazards".into(),
                msg: format!("line {}: {e}", i + 1),
            })?;
            let flood: bool = parts[2].trim().parse().map_err(|_| AdvisorError::KbFormat {
                file: "hazards".into(),
                msg: format!("line {}: bad flood flag {:?}", i + 1, parts[2]),
            })?;
            if map
                .insert(
                    district.to_lowercase(),
                    HazardZone {
                        district,
                        drought_severity: severity,
                        flood_prone: flood,
                    },
                )
                .is_some()
            {
                return Err(AdvisorError::KbFormat {
                    file: "hazards".into(),
                    msg: format!("line {}: duplicate district", i + 1),
                });
            }
        }
        Ok(HazardRegistry { map })
    }

    pub fn load(path: &Path) -> Result<HazardRegistry, AdvisorError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdvisorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        HazardRegistry::parse(&text)
    }

    /// Registry row, or an all-clear default with `known = false` for
    /// districts outside the registry.
    pub fn lookup(&self, district: &str) -> (HazardZone, bool) {
        match self.map.get(&district.trim().to_lowercase()) {
            Some(zone) => (zone.clone(), true),
            None => (HazardZone::all_clear(district.trim()), false),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Monthly decision thresholds: average max temperature (°C) and total
/// rainfall (mm), 12 complete rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateThresholds {
    rows: [(f64, f64); 12],
}

impl ClimateThresholds {
    pub fn bundled() -> ClimateThresholds {
        ClimateThresholds::parse(include_str!("../../../data/kb/thresholds.csv"))
            .expect("bundled thresholds are well-formed")
    }

    pub fn parse(text: &str) -> Result<ClimateThresholds, AdvisorError> {
        let mut rows = [(f64::NAN, f64::NAN); 12];
        let mut seen = [false; 12];
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("month,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = |msg: String| AdvisorError::KbFormat {
                file: "thresholds".into(),
                msg: format!("line {}: {msg}", i + 1),
            };
            if parts.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {line:?}")));
            }
            let month: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad month {:?}", parts[0])))?;
            if !(1..=12).contains(&month) {
                return Err(bad(format!("month {month} out of range")));
            }
            let temp: f64 = parts[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad temperature {:?}", parts[1])))?;
            let rain: f64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad rainfall {:?}", parts[2])))?;
            if temp <= 0.0 || rain <= 0.0 {
                return Err(bad("thresholds must be positive".into()));
            }
            if seen[month - 1] {
                return Err(bad(format!("duplicate month {month}")));
            }
            seen[month - 1] = true;
            rows[month - 1] = (temp, rain);
        }
        if seen != [true; 12] {
            return Err(AdvisorError::KbFormat {
                file: "thresholds".into(),
                msg: "need exactly 12 complete month rows".into(),
            });
        }
        Ok(ClimateThresholds { rows })
    }

    pub fn load(path: &Path) -> Result<ClimateThresholds, AdvisorError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdvisorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ClimateThresholds::parse(&text)
    }

    pub fn max_temp_c(&self, month: u32) -> f64 {
        self.rows[(month - 1) as usize].0
    }

    pub fn rainfall_mm(&self, month: u32) -> f64 {
        self.rows[(month - 1) as usize].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tolerance {
    Drought,
    Flood,
}

impl Tolerance {
    fn key(self) -> &'static str {
        match self {
            Tolerance::Drought => "drought",
            Tolerance::Flood => "flood",
        }
    }
}

/// Season × tolerance-class → crop list, from lines like
/// `rabi.drought = Wheat, Mustard, …`.
#[derive(Debug, Clone)]
pub struct CropTable {
    map: BTreeMap<(Season, Tolerance), Vec<String>>,
}

impl CropTable {
    pub fn bundled() -> CropTable {
        CropTable::parse(include_str!("../../../data/kb/crops.txt"))
            .expect("bundled crop table is well-formed")
    }

    pub fn parse(text: &str) -> Result<CropTable, AdvisorError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| AdvisorError::KbFormat {
                file: "crops".into(),
                msg: format!("line {}: {msg}", i + 1),
            };
            let (key, list) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `season.tolerance = crops`, got {line:?}")))?;
            let (season_key, tol_key) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| bad(format!("bad key {:?}", key.trim())))?;
            let season = match season_key {
                "rabi" => Season::Rabi,
                "kharif1" => Season::Kharif1,
                "kharif2" => Season::Kharif2,
                other => return Err(bad(format!("unknown season {other:?}"))),
            };
            let tolerance = match tol_key.trim() {
                "drought" => Tolerance::Drought,
                "flood" => Tolerance::Flood,
                other => return Err(bad(format!("unknown tolerance class {other:?}"))),
            };
            let crops: Vec<String> = list
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            if crops.is_empty() {
                return Err(bad("empty crop list".into()));
            }
            if map.insert((season, tolerance), crops).is_some() {
                return Err(bad(format!("duplicate entry {}.{}", season.key(), tolerance.key())));
            }
        }
        for season in [Season::Rabi, Season::Kharif1, Season::Kharif2] {
            for tol in [Tolerance::Drought, Tolerance::Flood] {
                if !map.contains_key(&(season, tol)) {
                    return Err(AdvisorError::KbFormat {
                        file: "crops".into(),
                        msg: format!("missing entry {}.{}", season.key(), tol.key()),
                    });
                }
            }
        }
        Ok(CropTable { map })
    }

    pub fn load(path: &Path) -> Result<CropTable, AdvisorError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdvisorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CropTable::parse(&text)
    }

    pub fn crops(&self, season: Season, tolerance: Tolerance) -> &[String] {
        &self.map[&(season, tolerance)]
    }
}

/// Daily forecast in physical units, starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    pub start: NaiveDate,
    pub rainfall: Vec<f64>,
    pub sunshine: Vec<f64>,
    pub humidity: Vec<f64>,
    pub temperature: Vec<f64>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.rainfall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rainfall.is_empty()
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start + Days::new(i as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Daily,
    Weekly,
    Monthly,
    Seasonal,
    Yearly,
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "daily" => Ok(Granularity::Daily),
            "weekly" => Ok(Granularity::Weekly),
            "monthly" => Ok(Granularity::Monthly),
            "seasonal" => Ok(Granularity::Seasonal),
            "yearly" => Ok(Granularity::Yearly),
            other => Err(format!(
                "unknown granularity {other:?} (expected daily|weekly|monthly|seasonal|yearly)"
            )),
        }
    }
}

/// One aggregated forecast period: rainfall is summed, the other features
/// are averaged; `partial` marks periods not fully covered by the forecast.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: usize,
    pub rainfall_total_mm: f64,
    pub sunshine_mean_h: f64,
    pub humidity_mean_pct: f64,
    pub temperature_mean_c: f64,
    pub partial: bool,
}

fn flush_period(
    rows: &mut Vec<SummaryRow>,
    forecast: &ForecastSeries,
    label: String,
    range: std::ops::Range<usize>,
    full_span: (NaiveDate, NaiveDate),
) {
    let days = range.len();
    if days == 0 {
        return;
    }
    let sum = |v: &[f64]| v[range.clone()].iter().sum::<f64>();
    let start = forecast.date_at(range.start);
    let end = forecast.date_at(range.end - 1);
    rows.push(SummaryRow {
        label,
        start,
        end,
        days,
        rainfall_total_mm: sum(&forecast.rainfall),
        sunshine_mean_h: sum(&forecast.sunshine) / days as f64,
        humidity_mean_pct: sum(&forecast.humidity) / days as f64,
        temperature_mean_c: sum(&forecast.temperature) / days as f64,
        partial: start > full_span.0 || end < full_span.1,
    });
}

fn month_bounds(d: NaiveDate) -> (NaiveDate, NaiveDate) {
    let first = NaiveDate::from_ymd_opt(d.year(), d.month(), 1).unwrap();
    let next = if d.month() == 12 {
        NaiveDate::from_ymd_opt(d.year() + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1).unwrap()
    };
    (first, next - Days::new(1))
}

/// Aggregates a daily forecast at the requested granularity.
pub fn aggregate_forecast(
    forecast: &ForecastSeries,
    granularity: Granularity,
) -> Result<Vec<SummaryRow>, AdvisorError> {
    let n = forecast.len();
    if n == 0 {
        return Err(AdvisorError::EmptyForecast);
    }
    let mut rows = Vec::new();
    match granularity {
        Granularity::Daily => {
            for i in 0..n {
                let d = forecast.date_at(i);
                flush_period(&mut rows, forecast, d.format("%Y-%m-%d").to_string(), i..i + 1, (d, d));
            }
        }
        Granularity::Weekly => {
            let mut i = 0;
            let mut week = 1;
            while i < n {
                let end = (i + 7).min(n);
                let span_end = forecast.date_at(i) + Days::new(6);
                flush_period(
                    &mut rows,
                    forecast,
                    format!("week {week}"),
                    i..end,
                    (forecast.date_at(i), span_end),
                );
                i = end;
                week += 1;
            }
        }
        Granularity::Monthly => {
            let mut i = 0;
            while i < n {
                let (first, last) = month_bounds(forecast.date_at(i));
                let mut j = i;
                while j < n && forecast.date_at(j) <= last {
                    j += 1;
                }
                let label = forecast.date_at(i).format("%Y-%m").to_string();
                flush_period(&mut rows, forecast, label, i..j, (first, last));
                i = j;
            }
        }
        Granularity::Seasonal => {
            let mut i = 0;
            while i < n {
                let (first, last) = season_bounds(forecast.date_at(i));
                let mut j = i;
                while j < n && forecast.date_at(j) <= last {
                    j += 1;
                }
                let season = current_season(forecast.date_at(i));
                let label = format!("{} {}", season.name(), first.year());
                flush_period(&mut rows, forecast, label, i..j, (first, last));
                i = j;
            }
        }
        Granularity::Yearly => {
            let mut i = 0;
            let mut year = 1;
            while i < n {
                let end = (i + 365).min(n);
                let span_end = forecast.date_at(i) + Days::new(364);
                flush_period(
                    &mut rows,
                    forecast,
                    format!("year {year}"),
                    i..end,
                    (forecast.date_at(i), span_end),
                );
                i = end;
                year += 1;
            }
        }
    }
    Ok(rows)
}

/// Threshold-rule tuning. The climate table gives the reference values;
/// these factors decide what counts as significantly hot, dry or wet.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AdvisoryRules {
    /// Forecast monthly mean temperature must exceed the month's max-temp
    /// threshold by more than this many °C to flag heat.
    pub temp_excess_c: f64,
    /// Rainfall below `rain_low_factor` × threshold flags a dry month.
    pub rain_low_factor: f64,
    /// Rainfall above `rain_high_factor` × threshold flags a wet month.
    pub rain_high_factor: f64,
    /// Consecutive flagged months needed before a warning fires.
    pub consecutive_months: usize,
}

impl Default for AdvisoryRules {
    fn default() -> Self {
        AdvisoryRules {
            temp_excess_c: 2.0,
            rain_low_factor: 0.5,
            rain_high_factor: 1.5,
            consecutive_months: 2,
        }
    }
}

/// The advisory: hazard flags, fired warnings, crop suggestions, and the
/// monthly summary the rules were evaluated on.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Advisory {
    pub district: String,
    pub season: Season,
    pub hazard: HazardZone,
    /// False when the district is not in the hazard registry (treated as
    /// all-clear).
    pub hazard_known: bool,
    pub warnings: Vec<String>,
    pub crops: Vec<String>,
    pub monthly_summary: Vec<SummaryRow>,
}

fn extend_unique(crops: &mut Vec<String>, more: &[String]) {
    for c in more {
        if !crops.contains(c) {
            crops.push(c.clone());
        }
    }
}

/// Runs of at least `need` consecutive flagged entries.
fn consecutive_runs(flags: &[bool], need: usize) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= need {
                    runs.push(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if flags.len() - s >= need {
            runs.push(s..flags.len());
        }
    }
    runs
}

/// Applies the decision rules, in order:
/// 1. drought-prone district → drought-tolerant crops for the season;
/// 2. flood-prone district → flood/lodging-tolerant crops;
/// 3. ≥ N consecutive full months with excessive heat or deficient
///    rainfall → drought warning + drought-tolerant crops;
/// 4. ≥ N consecutive full months with heavy rainfall → heavy-rain
///    warning + water-lodging-tolerant crops.
/// Every fired rule accumulates.
pub fn recommend(
    district: &str,
    hazards: &HazardRegistry,
    thresholds: &ClimateThresholds,
    crop_table: &CropTable,
    rules: &AdvisoryRules,
    forecast: &ForecastSeries,
    date: NaiveDate,
) -> Result<Advisory, AdvisorError> {
    if forecast.is_empty() {
        return Err(AdvisorError::EmptyForecast);
    }
    let season = current_season(date);
    let (hazard, hazard_known) = hazards.lookup(district);
    let monthly = aggregate_forecast(forecast, Granularity::Monthly)?;
    let full_months: Vec<&SummaryRow> = monthly.iter().filter(|r| !r.partial).collect();
    if full_months.is_empty() {
        return Err(AdvisorError::InsufficientForecast);
    }

    let mut warnings = Vec::new();
    let mut crops = Vec::new();

    if hazard.drought_severity != DroughtSeverity::None {
        extend_unique(&mut crops, crop_table.crops(season, Tolerance::Drought));
    }
    if hazard.flood_prone {
        extend_unique(&mut crops, crop_table.crops(season, Tolerance::Flood));
    }

    let dry_flags: Vec<bool> = full_months
        .iter()
        .map(|row| {
            let m = row.start.month();
            let too_hot = row.temperature_mean_c > thresholds.max_temp_c(m) + rules.temp_excess_c;
            let too_dry = row.rainfall_total_mm < rules.rain_low_factor * thresholds.rainfall_mm(m);
            too_hot || too_dry
        })
        .collect();
    for run in consecutive_runs(&dry_flags, rules.consecutive_months) {
        let months: Vec<&str> = run.clone().map(|i| full_months[i].label.as_str()).collect();
        warnings.push(format!(
            "drought risk: heat or rainfall deficit forecast for {}",
            months.join(", ")
        ));
        extend_unique(&mut crops, crop_table.crops(season, Tolerance::Drought));
    }

    let wet_flags: Vec<bool> = full_months
        .iter()
        .map(|row| {
            let m = row.start.month();
            row.rainfall_total_mm > rules.rain_high_factor * thresholds.rainfall_mm(m)
        })
        .collect();
    for run in consecutive_runs(&wet_flags, rules.consecutive_months) {
        let months: Vec<&str> = run.clone().map(|i| full_months[i].label.as_str()).collect();
        warnings.push(format!(
            "heavy rain: sustained rainfall above seasonal norms forecast for {}",
            months.join(", ")
        ));
        extend_unique(&mut crops, crop_table.crops(season, Tolerance::Flood));
    }

    Ok(Advisory {
        district: district.to_string(),
        season,
        hazard,
        hazard_known,
        warnings,
        crops,
        monthly_summary: monthly,
    })
}

/// Plain-text rendering of an advisory.
pub fn render_text(a: &Advisory) -> String {
    let mut out = String::new();
    out.push_str(&format!("district: {}\n", a.district));
    out.push_str(&format!("season: {}\n", a.season));
    out.push_str(&format!(
        "hazard: drought={} flood={}{}\n",
        a.hazard.drought_severity.key(),
        a.hazard.flood_prone,
        if a.hazard_known { "" } else { " (district not in registry)" }
    ));
    if a.warnings.is_empty() {
        out.push_str("warnings: none\n");
    } else {
        out.push_str("warnings:\n");
        for w in &a.warnings {
            out.push_str(&format!("  - {w}\n"));
        }
    }
    if a.crops.is_empty() {
        out.push_str("suggested crops: none\n");
    } else {
        out.push_str(&format!("suggested crops: {}\n", a.crops.join(", ")));
    }
    out.push_str("monthly outlook:\n");
    for r in &a.monthly_summary {
        out.push_str(&format!(
            "  {} rain {:.1} mm, temp {:.1} C, humidity {:.0} %, sunshine {:.1} h{}\n",
            r.label,
            r.rainfall_total_mm,
            r.temperature_mean_c,
            r.humidity_mean_pct,
            r.sunshine_mean_h,
            if r.partial { " (partial)" } else { "" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn constant_forecast(start: NaiveDate, days: usize, rain: f64, temp: f64) -> ForecastSeries {
        ForecastSeries {
            start,
            rainfall: vec![rain; days],
            sunshine: vec![7.0; days],
            humidity: vec![75.0; days],
            temperature: vec![temp; days],
        }
    }

    #[test]
    fn season_examples() {
        assert_eq!(current_season(d(2023, 1, 1)), Season::Rabi);
        assert_eq!(current_season(d(2023, 8, 1)), Season::Kharif2);
        assert_eq!(current_season(d(2023, 3, 16)), Season::Kharif1);
        assert_eq!(current_season(d(2023, 3, 15)), Season::Rabi);
        assert_eq!(current_season(d(2023, 11, 15)), Season::Kharif2);
        assert_eq!(current_season(d(2023, 11, 16)), Season::Rabi);
    }

    #[test]
    fn seasons_partition_leap_and_common_years() {
        for year in [2023, 2024] {
            let mut day = d(year, 1, 1);
            let mut counts = BTreeMap::new();
            while day.year() == year {
                *counts.entry(current_season(day)).or_insert(0usize) += 1;
                day = day + Days::new(1);
            }
            let total: usize = counts.values().sum();
            assert_eq!(total, if year == 2024 { 366 } else { 365 });
            assert_eq!(counts.len(), 3);
        }
    }

    #[test]
    fn constant_week_aggregation() {
        let f = constant_forecast(d(2023, 10, 2), 7, 2.0, 30.0);
        let rows = aggregate_forecast(&f, Granularity::Weekly).unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].rainfall_total_mm, 14.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].temperature_mean_c, 30.0, epsilon = 1e-12);
        assert!(!rows[0].partial);
    }

    #[test]
    fn seasonal_rows_for_aligned_year() {
        // starting exactly at a season boundary over a non-leap span:
        // three full season rows of 120 + 122 + 123 days
        let f = constant_forecast(d(2022, 11, 16), 365, 1.0, 28.0);
        let rows = aggregate_forecast(&f, Granularity::Seasonal).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| !r.partial));
        assert_eq!(rows[0].label, "Rabi 2022");
        assert_eq!(rows[0].days, 120);
        assert_eq!(rows[1].days, 122);
        assert_eq!(rows[2].days, 123);

        // the same alignment across a leap day runs one day short, so the
        // final season row is marked partial
        let f = constant_forecast(d(2023, 11, 16), 365, 1.0, 28.0);
        let rows = aggregate_forecast(&f, Granularity::Seasonal).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].partial && !rows[1].partial);
        assert!(rows[2].partial);
    }

    #[test]
    fn seasonal_rows_for_unaligned_year() {
        let f = constant_forecast(d(2023, 1, 1), 365, 1.0, 28.0);
        let rows = aggregate_forecast(&f, Granularity::Seasonal).unwrap();
        // partial Rabi, full Kharif-1, full Kharif-2, partial Rabi
        assert_eq!(rows.len(), 4);
        assert!(rows[0].partial);
        assert!(!rows[1].partial);
        assert!(!rows[2].partial);
        assert!(rows[3].partial);
        let total: usize = rows.iter().map(|r| r.days).sum();
        assert_eq!(total, 365);
    }

    #[test]
    fn yearly_is_one_row_for_365_days() {
        let f = constant_forecast(d(2023, 5, 10), 365, 0.5, 30.0);
        let rows = aggregate_forecast(&f, Granularity::Yearly).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(!rows[0].partial);
        assert_eq!(rows[0].days, 365);
    }

    #[test]
    fn empty_forecast_rejected() {
        let f = constant_forecast(d(2023, 1, 1), 0, 0.0, 0.0);
        assert!(matches!(
            aggregate_forecast(&f, Granularity::Daily),
            Err(AdvisorError::EmptyForecast)
        ));
    }

    fn kb() -> (HazardRegistry, ClimateThresholds, CropTable) {
        (
            HazardRegistry::bundled(),
            ClimateThresholds::bundled(),
            CropTable::bundled(),
        )
    }

    #[test]
    fn drought_district_in_rabi_suggests_drought_crops() {
        let (hazards, thresholds, crop_table) = kb();
        // benign forecast: rainfall right at the monthly norm
        let start = d(2024, 1, 1);
        let f = ForecastSeries {
            start,
            rainfall: (0..90).map(|i| {
                let m = (start + Days::new(i as u64)).month();
                thresholds.rainfall_mm(m) / 30.0
            }).collect(),
            sunshine: vec![7.0; 90],
            humidity: vec![75.0; 90],
            temperature: (0..90).map(|i| {
                let m = (start + Days::new(i as u64)).month();
                thresholds.max_temp_c(m) - 4.0
            }).collect(),
        };
        let a = recommend(
            "Rajshahi",
            &hazards,
            &thresholds,
            &crop_table,
            &AdvisoryRules::default(),
            &f,
            d(2024, 1, 10),
        )
        .unwrap();
        assert_eq!(a.season, Season::Rabi);
        assert_eq!(a.hazard.drought_severity, DroughtSeverity::VerySevere);
        for crop in ["T. aman rice", "Mustard", "Wheat"] {
            assert!(a.crops.iter().any(|c| c == crop), "missing {crop}");
        }
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn rain_deficit_two_months_fires_drought_warning() {
        let (hazards, thresholds, crop_table) = kb();
        // July + August with ~100 mm/month against 474.4 and 384.7 norms
        let f = constant_forecast(d(2024, 7, 1), 62, 100.0 / 31.0, 29.0);
        let a = recommend(
            "Dhaka",
            &hazards,
            &thresholds,
            &crop_table,
            &AdvisoryRules::default(),
            &f,
            d(2024, 7, 1),
        )
        .unwrap();
        assert!(!a.hazard_known);
        assert_eq!(a.warnings.len(), 1);
        assert!(a.warnings[0].contains("drought risk"));
        assert!(a.warnings[0].contains("2024-07"));
        assert!(a.warnings[0].contains("2024-08"));
        assert!(!a.crops.is_empty());
    }

    #[test]
    fn all_clear_forecast_yields_empty_advisory() {
        let (hazards, thresholds, crop_table) = kb();
        let start = d(2024, 3, 1);
        let days = 92;
        let f = ForecastSeries {
            start,
            rainfall: (0..days).map(|i| {
                let m = (start + Days::new(i as u64)).month();
                thresholds.rainfall_mm(m) / 30.0
            }).collect(),
            sunshine: vec![8.0; days],
            humidity: vec![70.0; days],
            temperature: (0..days).map(|i| {
                let m = (start + Days::new(i as u64)).month();
                thresholds.max_temp_c(m) - 3.0
            }).collect(),
        };
        let a = recommend(
            "Khagrachari",
            &hazards,
            &thresholds,
            &crop_table,
            &AdvisoryRules::default(),
            &f,
            d(2024, 3, 20),
        )
        .unwrap();
        assert!(a.warnings.is_empty());
        assert!(a.crops.is_empty());
        assert!(!a.hazard_known);
    }

    #[test]
    fn heavy_rain_two_months_fires_lodging_warning() {
        let (hazards, thresholds, crop_table) = kb();
        // January + February with rainfall far above the 10.1/20.2 norms
        let f = constant_forecast(d(2024, 1, 1), 60, 5.0, 24.0);
        let a = recommend(
            "Dhaka",
            &hazards,
            &thresholds,
            &crop_table,
            &AdvisoryRules::default(),
            &f,
            d(2024, 1, 1),
        )
        .unwrap();
        assert_eq!(a.warnings.len(), 1);
        assert!(a.warnings[0].contains("heavy rain"));
        // Rabi flood-tolerant list
        assert!(a.crops.iter().any(|c| c == "Potato"));
    }

    #[test]
    fn partial_months_do_not_count() {
        let (hazards, thresholds, crop_table) = kb();
        // covers Jan 15 .. Mar 20: only February is a full month, so no
        // 2-consecutive-month rule can fire, but the advisory still works
        let f = constant_forecast(d(2024, 1, 15), 66, 0.0, 40.0);
        let a = recommend(
            "Dhaka",
            &hazards,
            &thresholds,
            &crop_table,
            &AdvisoryRules::default(),
            &f,
            d(2024, 1, 15),
        )
        .unwrap();
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn forecast_without_a_full_month_is_insufficient() {
        let (hazards, thresholds, crop_table) = kb();
        let f = constant_forecast(d(2024, 1, 15), 20, 1.0, 25.0);
        assert!(matches!(
            recommend(
                "Dhaka",
                &hazards,
                &thresholds,
                &crop_table,
                &AdvisoryRules::default(),
                &f,
                d(2024, 1, 15),
            ),
            Err(AdvisorError::InsufficientForecast)
        ));
    }

    #[test]
    fn advisory_is_deterministic() {
        let (hazards, thresholds, crop_table) = kb();
        let f = constant_forecast(d(2024, 7, 1), 62, 1.0, 29.0);
        let a = recommend("Bogra", &hazards, &thresholds, &crop_table, &AdvisoryRules::default(), &f, d(2024, 7, 1)).unwrap();
        let b = recommend("Bogra", &hazards, &thresholds, &crop_table, &AdvisoryRules::default(), &f, d(2024, 7, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bundled_tables_load() {
        let (hazards, thresholds, crop_table) = kb();
        assert!(hazards.len() >= 30);
        assert_abs_diff_eq!(thresholds.rainfall_mm(7), 474.4, epsilon = 1e-12);
        assert_abs_diff_eq!(thresholds.max_temp_c(1), 25.3, epsilon = 1e-12);
        assert!(crop_table
            .crops(Season::Rabi, Tolerance::Drought)
            .iter()
            .any(|c| c == "Wheat"));
    }

    proptest! {
        #[test]
        fn every_date_maps_to_exactly_one_season(y in 1950i32..2100, doy in 0u32..366) {
            let start = d(y, 1, 1);
            let date = start + Days::new(doy as u64);
            if date.year() == y {
                let s = current_season(date);
                let (lo, hi) = season_bounds(date);
                prop_assert!(lo <= date && date <= hi);
                prop_assert_eq!(current_season(lo), s);
                prop_assert_eq!(current_season(hi), s);
            }
        }

        #[test]
        fn monthly_rainfall_conserves_daily_total(
            days in 1usize..500,
            rain in 0.0f64..30.0,
            start_off in 0u32..1000,
        ) {
            let start = d(2020, 1, 1) + Days::new(start_off as u64);
            let f = constant_forecast(start, days, rain, 28.0);
            let rows = aggregate_forecast(&f, Granularity::Monthly).unwrap();
            let total: f64 = rows.iter().map(|r| r.rainfall_total_mm).sum();
            let daily: f64 = f.rainfall.iter().sum();
            prop_assert!((total - daily).abs() <= 1e-9 * daily.max(1.0));
            let day_sum: usize = rows.iter().map(|r| r.days).sum();
            prop_assert_eq!(day_sum, days);
        }

        #[test]
        fn rule_monotonicity_in_rainfall(
            base_rain in 0.0f64..20.0,
            bump in 0.0f64..20.0,
        ) {
            let (hazards, thresholds, crop_table) = kb();
            let mk = |r: f64| constant_forecast(d(2024, 7, 1), 62, r, 29.0);
            let rules = AdvisoryRules::default();
            let low = recommend("X", &hazards, &thresholds, &crop_table, &rules, &mk(base_rain), d(2024, 7, 1)).unwrap();
            let high = recommend("X", &hazards, &thresholds, &crop_table, &rules, &mk(base_rain + bump), d(2024, 7, 1)).unwrap();
            let fired_drought = |a: &Advisory| a.warnings.iter().any(|w| w.contains("drought"));
            let fired_wet = |a: &Advisory| a.warnings.iter().any(|w| w.contains("heavy rain"));
            // more rain can never newly fire the drought rule
            if !fired_drought(&low) {
                prop_assert!(!fired_drought(&high));
            }
            // less rain can never newly fire the heavy-rain rule
            if !fired_wet(&high) {
                prop_assert!(!fired_wet(&low));
            }
        }
    }
}
