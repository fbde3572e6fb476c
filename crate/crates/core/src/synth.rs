//! Deterministic synthetic raw-file generator.
//!
//! Each station gets annual sinusoids with its own phases and amplitudes
//! plus Gaussian noise; rainfall is rectified at zero and right-skewed
//! through an exponential transform so the distributions resemble real
//! archives. Output is the raw monthly-matrix format, including a small
//! seeded sprinkling of blank and `*` missing cells, so the whole ETL
//! path gets exercised.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{days_in_month, RawVariable};
use crate::preprocess::degrees_to_compass;

/// Generator settings. Defaults: 20 years from 2000, 0.4% missing cells.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub stations: Vec<String>,
    pub years: usize,
    pub start_year: i32,
    pub missing_rate: f64,
}

impl SynthSpec {
    pub fn new(seed: u64, stations: Vec<String>, years: usize) -> SynthSpec {
        SynthSpec {
            seed,
            stations,
            years,
            start_year: 2000,
            missing_rate: 0.004,
        }
    }
}

/// Per-station generator parameters drawn once from the seed.
struct StationParams {
    phase: [f64; 5],
    amp: [f64; 5],
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn station_params(seed: u64, station: &str) -> StationParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(station.as_bytes()));
    let mut phase = [0.0; 5];
    let mut amp = [0.0; 5];
    for k in 0..5 {
        phase[k] = rng.gen_range(0.0..TAU);
        amp[k] = rng.gen_range(0.85..1.2);
    }
    StationParams { phase, amp }
}

/// One day of synthetic weather in physical units.
struct DayValues {
    rainfall: f64,
    sunshine: f64,
    humidity: f64,
    temperature: f64,
    wind_speed: f64,
    wind_direction_deg: f64,
}

fn day_values(p: &StationParams, date: NaiveDate, noise: &mut ChaCha8Rng) -> DayValues {
    let doy = date.ordinal0() as f64;
    let season = |k: usize| (TAU * doy / 365.25 + p.phase[k]).sin();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut eps = || normal.sample(noise);

    // rainfall: exponential of a seasonal signal, rectified at zero
    let z = 1.1 + 1.3 * p.amp[0] * season(0) + 0.12 * eps();
    let rainfall = (z.exp() - 1.5).max(0.0);
    let sunshine = (7.0 + 3.0 * p.amp[1] * season(1) + 0.4 * eps()).clamp(0.0, 14.0);
    let humidity = (75.0 + 12.0 * p.amp[2] * season(2) + 1.8 * eps()).clamp(20.0, 100.0);
    let temperature = 25.0 + 5.5 * p.amp[3] * season(3) + 0.6 * eps();
    let wind_speed = (8.0 + 3.0 * p.amp[4] * season(4) + 1.0 * eps()).max(0.0);
    let wind_direction_deg = (140.0 + 60.0 * season(4) + 20.0 * eps()).rem_euclid(360.0);
    DayValues {
        rainfall,
        sunshine,
        humidity,
        temperature,
        wind_speed,
        wind_direction_deg,
    }
}

/// Generates the six raw matrix files (one per variable) as text,
/// byte-deterministic for a given spec.
pub fn generate(spec: &SynthSpec) -> BTreeMap<RawVariable, String> {
    let mut files: BTreeMap<RawVariable, String> = RawVariable::ALL
        .into_iter()
        .map(|v| {
            let mut s = String::new();
            s.push_str("station,year,month");
            for d in 1..=31 {
                s.push_str(&format!(",{d}"));
            }
            s.push_str(",avg\n");
            (v, s)
        })
        .collect();

    for station in &spec.stations {
        let params = station_params(spec.seed, station);
        let mut noise = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(station.as_bytes()) ^ 0x5eed);
        let mut gaps = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(station.as_bytes()) ^ 0x6a95);
        for year in spec.start_year..spec.start_year + spec.years as i32 {
            for month in 1..=12u32 {
                let ndays = days_in_month(year, month);
                // per-variable day cells for this month
                let mut cells: BTreeMap<RawVariable, Vec<String>> = RawVariable::ALL
                    .into_iter()
                    .map(|v| (v, Vec::with_capacity(31)))
                    .collect();
                let mut sums: BTreeMap<RawVariable, (f64, usize)> = BTreeMap::new();
                for day in 1..=31u32 {
                    if day > ndays {
                        for v in RawVariable::ALL {
                            cells.get_mut(&v).unwrap().push(String::new());
                        }
                        continue;
                    }
                    let date = NaiveDate::from_ymd_opt(year, month, day).unwrap();
                    let vals = day_values(&params, date, &mut noise);
                    let mut push = |var: RawVariable, text: String, numeric: Option<f64>| {
                        // seeded missing cells, blank or star
                        if gaps.gen_bool(spec.missing_rate) {
                            let marker = if gaps.gen_bool(0.5) { "*" } else { "" };
                            cells.get_mut(&var).unwrap().push(marker.to_string());
                            return;
                        }
                        cells.get_mut(&var).unwrap().push(text);
                        if let Some(x) = numeric {
                            let e = sums.entry(var).or_insert((0.0, 0));
                            e.0 += x;
                            e.1 += 1;
                        }
                    };
                    push(
                        RawVariable::Rainfall,
                        format!("{:.2}", vals.rainfall),
                        Some(vals.rainfall),
                    );
                    push(
                        RawVariable::Sunshine,
                        format!("{:.2}", vals.sunshine),
                        Some(vals.sunshine),
                    );
                    push(
                        RawVariable::Humidity,
                        format!("{:.2}", vals.humidity),
                        Some(vals.humidity),
                    );
                    push(
                        RawVariable::Temperature,
                        format!("{:.2}", vals.temperature),
                        Some(vals.temperature),
                    );
                    push(
                        RawVariable::WindSpeed,
                        format!("{:.2}", vals.wind_speed),
                        Some(vals.wind_speed),
                    );
                    push(
                        RawVariable::WindDirection,
                        degrees_to_compass(vals.wind_direction_deg).to_string(),
                        None,
                    );
                }
                for var in RawVariable::ALL {
                    let avg = match sums.get(&var) {
                        Some((s, n)) if *n > 0 => format!("{:.2}", s / *n as f64),
                        _ => String::new(),
                    };
                    let file = files.get_mut(&var).unwrap();
                    file.push_str(&format!(
                        "{station},{year},{month},{},{avg}\n",
                        cells[&var].join(",")
                    ));
                }
            }
        }
    }
    files
}

/// Writes the generated files as `<variable>.csv` under `dir`.
pub fn write_raw_files(
    spec: &SynthSpec,
    dir: &std::path::Path,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = generate(spec);
    let mut written = Vec::new();
    for (var, text) in files {
        let path = dir.join(format!("{}.csv", var.file_stem()));
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
