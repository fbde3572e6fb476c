//! Raw station-file ingestion.
//!
//! Station archives arrive as one matrix row per station-month: the row
//! names the station, year and month, then carries 31 day cells and a
//! monthly average. Cells are numeric, blank (missing) or `*` (missing).
//! This module parses those rows, expands them to daily long format,
//! merges the per-variable files into one contiguous daily series per
//! station, and round-trips the canonical daily CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::preprocess::{compass_to_degrees, wind_to_vector};

/// Canonical daily features, in the fixed column order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Rainfall,
    Sunshine,
    Humidity,
    Temperature,
    WindX,
    WindY,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::Rainfall,
        Feature::Sunshine,
        Feature::Humidity,
        Feature::Temperature,
        Feature::WindX,
        Feature::WindY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Rainfall => "rainfall",
            Feature::Sunshine => "sunshine",
            Feature::Humidity => "humidity",
            Feature::Temperature => "temperature",
            Feature::WindX => "wx",
            Feature::WindY => "wy",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn index(self) -> usize {
        Feature::ALL.iter().position(|f| *f == self).unwrap()
    }

    /// Whether the physical quantity is non-negative (log-based metrics
    /// only make sense for these).
    pub fn non_negative(self) -> bool {
        matches!(self, Feature::Rainfall | Feature::Sunshine | Feature::Humidity)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Variables as they appear in the raw per-variable matrix files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RawVariable {
    Rainfall,
    Sunshine,
    Humidity,
    Temperature,
    WindSpeed,
    WindDirection,
}

impl RawVariable {
    pub const ALL: [RawVariable; 6] = [
        RawVariable::Rainfall,
        RawVariable::Sunshine,
        RawVariable::Humidity,
        RawVariable::Temperature,
        RawVariable::WindSpeed,
        RawVariable::WindDirection,
    ];

    /// File stem used for `<stem>.csv` in a raw data directory.
    pub fn file_stem(self) -> &'static str {
        match self {
            RawVariable::Rainfall => "rainfall",
            RawVariable::Sunshine => "sunshine",
            RawVariable::Humidity => "humidity",
            RawVariable::Temperature => "temperature",
            RawVariable::WindSpeed => "wind_speed",
            RawVariable::WindDirection => "wind_direction",
        }
    }

    pub fn from_stem(stem: &str) -> Option<RawVariable> {
        RawVariable::ALL.into_iter().find(|v| v.file_stem() == stem)
    }
}

impl fmt::Display for RawVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

/// One day cell of a raw matrix row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Blank,
    Star,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// One raw row: a station-month with 31 day cells and the monthly average.
#[derive(Debug, Clone)]
pub struct RawMonthRow {
    pub station: String,
    pub year: i32,
    pub month: u32,
    pub day_values: [Cell; 31],
    pub monthly_avg: Option<f64>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("{station} {year}-{month:02}: day-{day} cell holds data beyond the month length")]
    CalendarViolation {
        station: String,
        year: i32,
        month: u32,
        day: u32,
    },
    #[error("duplicate row for {station} {year}-{month:02}")]
    DuplicateRow { station: String, year: i32, month: u32 },
    #[error("station sets differ between variable files: {0}")]
    StationMismatch(String),
    #[error("wind speed and wind direction files must be provided together")]
    IncompleteWind,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Alias table mapping case-folded name variants to canonical station ids.
#[derive(Debug, Clone, Default)]
pub struct StationAliases {
    map: BTreeMap<String, String>,
}

impl StationAliases {
    /// The table shipped with the crate (editable copy lives in `data/kb/`).
    pub fn bundled() -> StationAliases {
        StationAliases::parse(include_str!("../../../data/kb/aliases.csv"))
            .expect("bundled alias table is well-formed")
    }

    /// Parses `alias,canonical` lines; `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<StationAliases, IngestError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "alias,canonical" {
                continue;
            }
            let (alias, canon) = line.split_once(',').ok_or_else(|| IngestError::Format {
                line: i + 1,
                msg: format!("expected `alias,canonical`, got {line:?}"),
            })?;
            map.insert(alias.trim().to_lowercase(), canon.trim().to_string());
        }
        Ok(StationAliases { map })
    }

    pub fn load(path: &Path) -> Result<StationAliases, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StationAliases::parse(&text)
    }

    /// Trim, case-fold, and look up; unknown names pass through trimmed.
    pub fn canonicalize(&self, raw: &str) -> String {
        let trimmed = raw.trim();
        match self.map.get(&trimmed.to_lowercase()) {
            Some(canon) => canon.clone(),
            None => trimmed.to_string(),
        }
    }
}

fn parse_cell(
    text: &str,
    variable: RawVariable,
    line: usize,
    col: &str,
) -> Result<Cell, IngestError> {
    let t = text.trim();
    if t.is_empty() {
        return Ok(Cell::Blank);
    }
    if t == "*" {
        return Ok(Cell::Star);
    }
    if let Ok(v) = t.parse::<f64>() {
        if !v.is_finite() {
            return Err(IngestError::Format {
                line,
                msg: format!("non-finite value {t:?} in {col}"),
            });
        }
        return Ok(Cell::Value(v));
    }
    // direction files may hold 16-point compass strings
    if variable == RawVariable::WindDirection {
        if let Some(deg) = compass_to_degrees(t) {
            return Ok(Cell::Value(deg));
        }
    }
    Err(IngestError::Format {
        line,
        msg: format!("cell {col} is not numeric, blank or `*`: {t:?}"),
    })
}

fn parse_int_field(text: &str, what: &str, line: usize) -> Result<i64, IngestError> {
    // archives write integers as "1960" or "1960.0"
    let t = text.trim();
    let v: f64 = t.parse().map_err(|_| IngestError::Format {
        line,
        msg: format!("{what} is not numeric: {t:?}"),
    })?;
    if v.fract() != 0.0 {
        return Err(IngestError::Format {
            line,
            msg: format!("{what} is not an integer: {t:?}"),
        });
    }
    Ok(v as i64)
}

/// Parses one raw data line (35 comma-separated fields).
pub fn parse_raw_line(
    text: &str,
    variable: RawVariable,
    aliases: &StationAliases,
    line: usize,
) -> Result<RawMonthRow, IngestError> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 35 {
        return Err(IngestError::Format {
            line,
            msg: format!("expected 35 fields (station,year,month,31 days,avg), got {}", fields.len()),
        });
    }
    let station = aliases.canonicalize(fields[0]);
    if station.is_empty() {
        return Err(IngestError::Format {
            line,
            msg: "empty station name".into(),
        });
    }
    let year = parse_int_field(fields[1], "year", line)?;
    if !(1948..=2100).contains(&year) {
        return Err(IngestError::Format {
            line,
            msg: format!("year {year} out of range 1948..=2100"),
        });
    }
    let month = parse_int_field(fields[2], "month", line)?;
    if !(1..=12).contains(&month) {
        return Err(IngestError::Format {
            line,
            msg: format!("month {month} out of range 1..=12"),
        });
    }
    let mut day_values = [Cell::Blank; 31];
    for (d, cell) in fields[3..34].iter().enumerate() {
        day_values[d] = parse_cell(cell, variable, line, &format!("day {}", d + 1))?;
    }
    let monthly_avg = match parse_cell(fields[34], variable, line, "avg")? {
        Cell::Value(v) => Some(v),
        _ => None,
    };
    Ok(RawMonthRow {
        station,
        year: year as i32,
        month: month as u32,
        day_values,
        monthly_avg,
    })
}

/// Parses a whole raw matrix file. A leading header row (first field
/// `station`, any case) is skipped.
pub fn parse_raw_file(
    text: &str,
    variable: RawVariable,
    aliases: &StationAliases,
) -> Result<Vec<RawMonthRow>, IngestError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            let first = line.split(',').next().unwrap_or("").trim().to_lowercase();
            if first == "station" || first == "city" {
                continue;
            }
        }
        rows.push(parse_raw_line(line, variable, aliases, i + 1)?);
    }
    Ok(rows)
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    };
    next.signed_duration_since(first).num_days() as u32
}

/// One daily observation in long format, possibly missing.
pub type DailyValue = (String, NaiveDate, Option<f64>);

/// Expands monthly matrix rows into daily long format.
///
/// Emits exactly one entry per valid calendar day of each row; blank and
/// `*` cells become missing. The monthly average column is dropped. A
/// non-blank cell past the month's end is a hard error: it almost always
/// means the row's columns are shifted.
pub fn parse_monthly_matrix(
    rows: &[RawMonthRow],
    _variable: RawVariable,
) -> Result<Vec<DailyValue>, IngestError> {
    let mut seen: BTreeSet<(String, i32, u32)> = BTreeSet::new();
    let mut out = Vec::new();
    for row in rows {
        let key = (row.station.clone(), row.year, row.month);
        if !seen.insert(key) {
            return Err(IngestError::DuplicateRow {
                station: row.station.clone(),
                year: row.year,
                month: row.month,
            });
        }
        let ndays = days_in_month(row.year, row.month);
        for (idx, cell) in row.day_values.iter().enumerate() {
            let day = idx as u32 + 1;
            if day > ndays {
                if !matches!(cell, Cell::Blank) {
                    return Err(IngestError::CalendarViolation {
                        station: row.station.clone(),
                        year: row.year,
                        month: row.month,
                        day,
                    });
                }
                continue;
            }
            let date = NaiveDate::from_ymd_opt(row.year, row.month, day).unwrap();
            out.push((row.station.clone(), date, cell.value()));
        }
    }
    Ok(out)
}

/// One daily record assembled from a series (missing fields are `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub station: String,
    pub date: NaiveDate,
    pub rainfall: Option<f64>,
    pub sunshine: Option<f64>,
    pub humidity: Option<f64>,
    pub temperature: Option<f64>,
    pub wx: Option<f64>,
    pub wy: Option<f64>,
}

/// A station's contiguous daily multivariate table.
///
/// Columns follow [`Feature::ALL`] order; `included` lists the features
/// that were actually supplied by the source files (the rest stay fully
/// missing). Dates run from `start` with no gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub station: String,
    pub start: NaiveDate,
    cols: [Vec<Option<f64>>; 6],
    included: Vec<Feature>,
}

impl DailySeries {
    pub fn new(station: impl Into<String>, start: NaiveDate, len: usize, included: Vec<Feature>) -> DailySeries {
        DailySeries {
            station: station.into(),
            start,
            cols: std::array::from_fn(|_| vec![None; len]),
            included,
        }
    }

    pub fn len(&self) -> usize {
        self.cols[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn included(&self) -> &[Feature] {
        &self.included
    }

    pub fn feature_names(&self) -> Vec<&'static str> {
        self.included.iter().map(|f| f.name()).collect()
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start
            .checked_add_days(Days::new(i as u64))
            .expect("date in range")
    }

    pub fn end(&self) -> NaiveDate {
        self.date_at(self.len() - 1)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let off = date.signed_duration_since(self.start).num_days();
        if off < 0 || off as usize >= self.len() {
            None
        } else {
            Some(off as usize)
        }
    }

    pub fn get(&self, feature: Feature, i: usize) -> Option<f64> {
        self.cols[feature.index()][i]
    }

    pub fn set(&mut self, feature: Feature, i: usize, value: Option<f64>) {
        self.cols[feature.index()][i] = value;
    }

    pub fn column(&self, feature: Feature) -> &[Option<f64>] {
        &self.cols[feature.index()]
    }

    pub fn column_mut(&mut self, feature: Feature) -> &mut Vec<Option<f64>> {
        &mut self.cols[feature.index()]
    }

    pub fn record(&self, i: usize) -> DailyRecord {
        DailyRecord {
            station: self.station.clone(),
            date: self.date_at(i),
            rainfall: self.get(Feature::Rainfall, i),
            sunshine: self.get(Feature::Sunshine, i),
            humidity: self.get(Feature::Humidity, i),
            temperature: self.get(Feature::Temperature, i),
            wx: self.get(Feature::WindX, i),
            wy: self.get(Feature::WindY, i),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = DailyRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    /// Extracts the listed features as a dense row-per-day matrix.
    /// Fails if any requested value is still missing.
    pub fn to_matrix(&self, features: &[Feature]) -> Result<ndarray::Array2<f64>, IngestError> {
        let mut m = ndarray::Array2::zeros((self.len(), features.len()));
        for (j, &f) in features.iter().enumerate() {
            for i in 0..self.len() {
                match self.get(f, i) {
                    Some(v) => m[[i, j]] = v,
                    None => {
                        return Err(IngestError::Format {
                            line: 0,
                            msg: format!(
                                "{} has a missing {} value at {}; impute first",
                                self.station,
                                f,
                                self.date_at(i)
                            ),
                        })
                    }
                }
            }
        }
        Ok(m)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        // normalize -0.0 so round-trips stay byte-stable
        Some(x) => format!("{}", if x == 0.0 { 0.0 } else { x }),
        None => String::new(),
    }
}

/// Serializes a series to the canonical daily CSV
/// (`station,date,rainfall,sunshine,humidity,temperature,wx,wy`,
/// empty field = missing, ISO-8601 dates).
pub fn write_canonical_csv(series: &DailySeries) -> String {
    let mut out = String::with_capacity(series.len() * 48 + 64);
    out.push_str("station,date,rainfall,sunshine,humidity,temperature,wx,wy\n");
    for i in 0..series.len() {
        out.push_str(&series.station);
        out.push(',');
        out.push_str(&series.date_at(i).format("%Y-%m-%d").to_string());
        for f in Feature::ALL {
            out.push(',');
            out.push_str(&fmt_opt(series.get(f, i)));
        }
        out.push('\n');
    }
    out
}

/// Reads a canonical daily CSV back into a series.
///
/// Features with at least one non-empty value are marked included, so a
/// write→read round trip is the identity for any series whose included
/// features carry at least one observation.
pub fn read_canonical_csv(text: &str) -> Result<DailySeries, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "station,date,rainfall,sunshine,humidity,temperature,wx,wy" => {}
        other => {
            return Err(IngestError::Format {
                line: 1,
                msg: format!("bad canonical CSV header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut station: Option<String> = None;
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cols: [Vec<Option<f64>>; 6] = std::array::from_fn(|_| Vec::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(IngestError::Format {
                line: i + 1,
                msg: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        match &station {
            None => station = Some(fields[0].to_string()),
            Some(s) if s == fields[0] => {}
            Some(s) => {
                return Err(IngestError::Format {
                    line: i + 1,
                    msg: format!("mixed stations in one file: {s:?} vs {:?}", fields[0]),
                })
            }
        }
        let date = NaiveDate::parse_from_str(fields[1], "%Y-%m-%d").map_err(|e| IngestError::Format {
            line: i + 1,
            msg: format!("bad date {:?}: {e}", fields[1]),
        })?;
        if let Some(prev) = dates.last() {
            if date != prev.succ_opt().unwrap() {
                return Err(IngestError::Format {
                    line: i + 1,
                    msg: format!("dates must be contiguous: {prev} then {date}"),
                });
            }
        }
        dates.push(date);
        for (j, field) in fields[2..8].iter().enumerate() {
            let t = field.trim();
            if t.is_empty() {
                cols[j].push(None);
            } else {
                let v: f64 = t.parse().map_err(|_| IngestError::Format {
                    line: i + 1,
                    msg: format!("bad value {t:?}"),
                })?;
                cols[j].push(Some(v));
            }
        }
    }
    let station = station.ok_or(IngestError::Format {
        line: 1,
        msg: "empty canonical CSV".into(),
    })?;
    let included = Feature::ALL
        .into_iter()
        .filter(|f| cols[f.index()].iter().any(|v| v.is_some()))
        .collect();
    Ok(DailySeries {
        station,
        start: dates[0],
        cols,
        included,
    })
}

/// Merges per-variable daily tables into one contiguous series per station.
///
/// Every date present in any variable appears in the output (the range is
/// padded to be gap-free); absent variables stay missing. Wind speed and
/// direction are combined into the (wx, wy) vector, which requires both
/// wind files or neither. Station sets must agree across files after alias
/// resolution.
pub fn merge_variable_files(
    tables: &BTreeMap<RawVariable, Vec<DailyValue>>,
) -> Result<Vec<DailySeries>, IngestError> {
    if tables.is_empty() {
        return Err(IngestError::StationMismatch("no variable files given".into()));
    }
    let has_speed = tables.contains_key(&RawVariable::WindSpeed);
    let has_dir = tables.contains_key(&RawVariable::WindDirection);
    if has_speed != has_dir {
        return Err(IngestError::IncompleteWind);
    }

    // station sets must agree across variables
    let mut sets: BTreeMap<RawVariable, BTreeSet<&str>> = BTreeMap::new();
    for (var, rows) in tables {
        sets.insert(*var, rows.iter().map(|(s, _, _)| s.as_str()).collect());
    }
    let mut iter = sets.iter();
    let (first_var, first_set) = iter.next().unwrap();
    for (var, set) in iter {
        if set != first_set {
            let only_a: Vec<_> = first_set.difference(set).collect();
            let only_b: Vec<_> = set.difference(first_set).collect();
            return Err(IngestError::StationMismatch(format!(
                "{first_var} has {only_a:?} not in {var}; {var} has {only_b:?} not in {first_var}"
            )));
        }
    }

    let included: Vec<Feature> = [
        (RawVariable::Rainfall, Feature::Rainfall),
        (RawVariable::Sunshine, Feature::Sunshine),
        (RawVariable::Humidity, Feature::Humidity),
        (RawVariable::Temperature, Feature::Temperature),
    ]
    .into_iter()
    .filter(|(v, _)| tables.contains_key(v))
    .map(|(_, f)| f)
    .chain(if has_speed {
        vec![Feature::WindX, Feature::WindY]
    } else {
        vec![]
    })
    .collect();

    let mut out = Vec::new();
    for station in first_set {
        // date range = union across variables
        let mut min_date: Option<NaiveDate> = None;
        let mut max_date: Option<NaiveDate> = None;
        for rows in tables.values() {
            for (s, d, _) in rows {
                if s == station {
                    min_date = Some(min_date.map_or(*d, |m| m.min(*d)));
                    max_date = Some(max_date.map_or(*d, |m| m.max(*d)));
                }
            }
        }
        let (min_date, max_date) = (min_date.unwrap(), max_date.unwrap());
        let len = max_date.signed_duration_since(min_date).num_days() as usize + 1;
        let mut series = DailySeries::new(station.to_string(), min_date, len, included.clone());

        for (var, rows) in tables {
            let feature = match var {
                RawVariable::Rainfall => Some(Feature::Rainfall),
                RawVariable::Sunshine => Some(Feature::Sunshine),
                RawVariable::Humidity => Some(Feature::Humidity),
                RawVariable::Temperature => Some(Feature::Temperature),
                RawVariable::WindSpeed | RawVariable::WindDirection => None,
            };
            if let Some(feature) = feature {
                for (s, d, v) in rows {
                    if s == station {
                        let i = series.index_of(*d).unwrap();
                        series.set(feature, i, *v);
                    }
                }
            }
        }

        if has_speed {
            let speeds = &tables[&RawVariable::WindSpeed];
            let dirs = &tables[&RawVariable::WindDirection];
            let mut speed_by_date: BTreeMap<NaiveDate, f64> = BTreeMap::new();
            let mut dir_by_date: BTreeMap<NaiveDate, f64> = BTreeMap::new();
            for (s, d, v) in speeds {
                if s == station {
                    if let Some(v) = v {
                        speed_by_date.insert(*d, *v);
                    }
                }
            }
            for (s, d, v) in dirs {
                if s == station {
                    if let Some(v) = v {
                        dir_by_date.insert(*d, *v);
                    }
                }
            }
            for (date, speed) in &speed_by_date {
                if let Some(deg) = dir_by_date.get(date) {
                    let (wx, wy) = wind_to_vector(*speed, *deg).map_err(|e| IngestError::Format {
                        line: 0,
                        msg: format!("{station} {date}: {e}"),
                    })?;
                    let i = series.index_of(*date).unwrap();
                    series.set(Feature::WindX, i, Some(wx));
                    series.set(Feature::WindY, i, Some(wy));
                }
            }
        }

        out.push(series);
    }
    Ok(out)
}

/// Reads every recognized `<variable>.csv` under a directory and merges.
pub fn ingest_dir(dir: &Path, aliases: &StationAliases) -> Result<Vec<DailySeries>, IngestError> {
    let mut tables = BTreeMap::new();
    for var in RawVariable::ALL {
        let path = dir.join(format!("{}.csv", var.file_stem()));
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|source| IngestError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let rows = parse_raw_file(&text, var, aliases)?;
            tables.insert(var, parse_monthly_matrix(&rows, var)?);
        }
    }
    merge_variable_files(&tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;
    use proptest::prelude::*;

    fn aliases() -> StationAliases {
        StationAliases::parse("dhaka,Dhaka\nm. court,M.court\nmaijdee court,M.court\n").unwrap()
    }

    fn row_line(station: &str, year: i32, month: u32, cells: &[(u32, &str)], avg: &str) -> String {
        let mut fields = vec![String::new(); 35];
        fields[0] = station.into();
        fields[1] = format!("{year}.0");
        fields[2] = format!("{month}.0");
        for (day, v) in cells {
            fields[2 + *day as usize] = (*v).into();
        }
        fields[34] = avg.into();
        fields.join(",")
    }

    #[test]
    fn parses_day_one_value() {
        let line = row_line("Dhaka", 1960, 1, &[(1, "71")], "67");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        let daily = parse_monthly_matrix(&[row], RawVariable::Humidity).unwrap();
        assert_eq!(
            daily[0],
            (
                "Dhaka".to_string(),
                NaiveDate::from_ymd_opt(1960, 1, 1).unwrap(),
                Some(71.0)
            )
        );
        assert_eq!(daily.len(), 31);
    }

    #[test]
    fn no_entry_past_month_end() {
        let line = row_line("Dhaka", 1960, 2, &[(1, "60")], "58");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        let daily = parse_monthly_matrix(&[row], RawVariable::Humidity).unwrap();
        // 1960 is a leap year: exactly 29 entries, none on Feb 30/31
        assert_eq!(daily.len(), 29);
        assert!(daily.iter().all(|(_, d, _)| d.day() <= 29));
    }

    #[test]
    fn star_cell_is_missing() {
        let line = row_line("Dhaka", 1960, 3, &[(5, "*")], "");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        let daily = parse_monthly_matrix(&[row], RawVariable::Humidity).unwrap();
        let d5 = daily
            .iter()
            .find(|(_, d, _)| *d == NaiveDate::from_ymd_opt(1960, 3, 5).unwrap())
            .unwrap();
        assert_eq!(d5.2, None);
    }

    #[test]
    fn value_beyond_month_length_is_error() {
        let line = row_line("Dhaka", 1961, 2, &[(30, "55")], "");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        let err = parse_monthly_matrix(&[row], RawVariable::Humidity).unwrap_err();
        assert!(matches!(err, IngestError::CalendarViolation { day: 30, .. }));
    }

    #[test]
    fn star_beyond_month_length_is_error() {
        let line = row_line("Dhaka", 1961, 4, &[(31, "*")], "");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        assert!(parse_monthly_matrix(&[row], RawVariable::Humidity).is_err());
    }

    #[test]
    fn emitted_day_count_matches_month_length() {
        for (y, m, expect) in [(1960, 2, 29), (1961, 2, 28), (1960, 4, 30), (1960, 1, 31)] {
            let line = row_line("Dhaka", y, m, &[], "");
            let row = parse_raw_line(&line, RawVariable::Rainfall, &aliases(), 2).unwrap();
            let daily = parse_monthly_matrix(&[row], RawVariable::Rainfall).unwrap();
            assert_eq!(daily.len(), expect, "{y}-{m}");
        }
    }

    #[test]
    fn non_numeric_cell_is_format_error() {
        let line = row_line("Dhaka", 1960, 1, &[(2, "abc")], "");
        assert!(parse_raw_line(&line, RawVariable::Humidity, &aliases(), 3).is_err());
    }

    #[test]
    fn duplicate_station_month_rejected() {
        let l1 = row_line("Dhaka", 1960, 1, &[(1, "70")], "");
        let l2 = row_line("DHAKA ", 1960, 1, &[(1, "71")], "");
        let rows = vec![
            parse_raw_line(&l1, RawVariable::Humidity, &aliases(), 1).unwrap(),
            parse_raw_line(&l2, RawVariable::Humidity, &aliases(), 2).unwrap(),
        ];
        let err = parse_monthly_matrix(&rows, RawVariable::Humidity).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateRow { .. }));
    }

    #[test]
    fn alias_resolves_spelling_variants() {
        let a = aliases();
        assert_eq!(a.canonicalize(" maijdee court "), "M.court");
        assert_eq!(a.canonicalize("M. Court"), "M.court");
        assert_eq!(a.canonicalize("Sylhet"), "Sylhet");
    }

    #[test]
    fn day_count_conservation() {
        // non-missing outputs == numeric cells in input
        let lines = [
            row_line("Dhaka", 1960, 1, &[(1, "71"), (15, "64"), (31, "61")], "67"),
            row_line("Dhaka", 1960, 2, &[(3, "*"), (10, "58")], "58"),
        ];
        let rows: Vec<RawMonthRow> = lines
            .iter()
            .map(|l| parse_raw_line(l, RawVariable::Humidity, &aliases(), 1).unwrap())
            .collect();
        let numeric_cells: usize = rows
            .iter()
            .map(|r| r.day_values.iter().filter(|c| matches!(c, Cell::Value(_))).count())
            .sum();
        let daily = parse_monthly_matrix(&rows, RawVariable::Humidity).unwrap();
        let observed = daily.iter().filter(|(_, _, v)| v.is_some()).count();
        assert_eq!(observed, numeric_cells);
        assert_eq!(observed, 4);
    }

    #[test]
    fn monthly_average_is_dropped() {
        let line = row_line("Dhaka", 1960, 1, &[], "67");
        let row = parse_raw_line(&line, RawVariable::Humidity, &aliases(), 2).unwrap();
        assert_eq!(row.monthly_avg, Some(67.0));
        let daily = parse_monthly_matrix(&[row], RawVariable::Humidity).unwrap();
        assert!(daily.iter().all(|(_, _, v)| v.is_none()));
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn merge_unions_disjoint_date_ranges() {
        // hand-checked 5-day toy case: rainfall covers days 1-2,
        // humidity covers days 4-5, union spans 1-5 with a gap day
        let mut tables = BTreeMap::new();
        tables.insert(
            RawVariable::Rainfall,
            vec![
                ("Dhaka".to_string(), date(1980, 1, 1), Some(1.0)),
                ("Dhaka".to_string(), date(1980, 1, 2), Some(2.0)),
            ],
        );
        tables.insert(
            RawVariable::Humidity,
            vec![
                ("Dhaka".to_string(), date(1980, 1, 4), Some(80.0)),
                ("Dhaka".to_string(), date(1980, 1, 5), Some(81.0)),
            ],
        );
        let merged = merge_variable_files(&tables).unwrap();
        assert_eq!(merged.len(), 1);
        let s = &merged[0];
        assert_eq!(s.len(), 5);
        assert_eq!(s.start, date(1980, 1, 1));
        assert_eq!(s.get(Feature::Rainfall, 0), Some(1.0));
        assert_eq!(s.get(Feature::Rainfall, 2), None);
        assert_eq!(s.get(Feature::Humidity, 3), Some(80.0));
        assert_eq!(s.get(Feature::Humidity, 0), None);
        assert_eq!(s.included(), &[Feature::Rainfall, Feature::Humidity]);
    }

    #[test]
    fn merge_single_variable_degenerate() {
        let mut tables = BTreeMap::new();
        tables.insert(
            RawVariable::Sunshine,
            vec![("Bogra".to_string(), date(1990, 6, 1), Some(7.5))],
        );
        let merged = merge_variable_files(&tables).unwrap();
        assert_eq!(merged[0].included(), &[Feature::Sunshine]);
        assert_eq!(merged[0].len(), 1);
    }

    #[test]
    fn merge_rejects_station_set_mismatch() {
        let mut tables = BTreeMap::new();
        tables.insert(
            RawVariable::Rainfall,
            vec![("Dhaka".to_string(), date(1980, 1, 1), Some(1.0))],
        );
        tables.insert(
            RawVariable::Humidity,
            vec![("Daka".to_string(), date(1980, 1, 1), Some(80.0))],
        );
        assert!(matches!(
            merge_variable_files(&tables).unwrap_err(),
            IngestError::StationMismatch(_)
        ));
    }

    #[test]
    fn merge_requires_both_wind_files() {
        let mut tables = BTreeMap::new();
        tables.insert(
            RawVariable::WindSpeed,
            vec![("Dhaka".to_string(), date(1980, 1, 1), Some(5.0))],
        );
        assert!(matches!(
            merge_variable_files(&tables).unwrap_err(),
            IngestError::IncompleteWind
        ));
    }

    #[test]
    fn merge_computes_wind_vector() {
        let mut tables = BTreeMap::new();
        tables.insert(
            RawVariable::WindSpeed,
            vec![("Dhaka".to_string(), date(1980, 1, 1), Some(10.0))],
        );
        tables.insert(
            RawVariable::WindDirection,
            vec![("Dhaka".to_string(), date(1980, 1, 1), Some(90.0))],
        );
        let merged = merge_variable_files(&tables).unwrap();
        let s = &merged[0];
        let wx = s.get(Feature::WindX, 0).unwrap();
        let wy = s.get(Feature::WindY, 0).unwrap();
        assert!((wx - 10.0).abs() < 1e-12);
        assert!(wy.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn canonical_csv_round_trip(
            len in 1usize..40,
            seed in 0u64..1000,
            start_off in 0u32..3650,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let start = date(1960, 1, 1) + Days::new(start_off as u64);
            let included = vec![Feature::Rainfall, Feature::Humidity, Feature::Temperature];
            let mut s = DailySeries::new("Dhaka", start, len, included.clone());
            for f in included {
                let mut any = false;
                for i in 0..len {
                    if rng.gen_bool(0.8) {
                        let v: f64 = rng.gen_range(-50.0..400.0);
                        s.set(f, i, Some(v));
                        any = true;
                    }
                }
                if !any {
                    s.set(f, 0, Some(1.25));
                }
            }
            let text = write_canonical_csv(&s);
            let back = read_canonical_csv(&text).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
