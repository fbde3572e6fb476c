//! Great-circle distances and nearest-weather-station lookup.

use std::path::Path;

use thiserror::Error;

/// Earth radius used by the haversine distance, in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("latitude {0} out of [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} out of [-180, 180]")]
    BadLongitude(f64),
    #[error("station registry is empty")]
    EmptyRegistry,
    #[error("registry line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("duplicate station {0:?} in registry")]
    DuplicateStation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<GeoPoint, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) || !latitude.is_finite() {
            return Err(GeoError::BadLatitude(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) || !longitude.is_finite() {
            return Err(GeoError::BadLongitude(longitude));
        }
        Ok(GeoPoint {
            latitude,
            longitude,
        })
    }
}

/// Great-circle distance in km:
/// D = 2R·asin(√(sin²(Δφ/2) + cos φ₁·cos φ₂·sin²(Δλ/2))).
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.latitude.to_radians();
    let phi2 = b.latitude.to_radians();
    let dphi = (b.latitude - a.latitude).to_radians() / 2.0;
    let dlambda = (b.longitude - a.longitude).to_radians() / 2.0;
    let h = dphi.sin().powi(2) + phi1.cos() * phi2.cos() * dlambda.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Station registry: unique ids with coordinates.
#[derive(Debug, Clone)]
pub struct StationRegistry {
    entries: Vec<(String, GeoPoint)>,
}

impl StationRegistry {
    /// The registry shipped with the crate (editable copy in `data/kb/`).
    pub fn bundled() -> StationRegistry {
        StationRegistry::parse(include_str!("../../../data/kb/stations.csv"))
            .expect("bundled station registry is well-formed")
    }

    /// Parses `station,latitude,longitude` lines; `#` comments ignored.
    pub fn parse(text: &str) -> Result<StationRegistry, GeoError> {
        let mut entries: Vec<(String, GeoPoint)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "station,latitude,longitude" {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(name), Some(lat), Some(lon), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(GeoError::Format {
                    line: i + 1,
                    msg: format!("expected `station,latitude,longitude`, got {line:?}"),
                });
            };
            let lat: f64 = lat.trim().parse().map_err(|_| GeoError::Format {
                line: i + 1,
                msg: format!("bad latitude {lat:?}"),
            })?;
            let lon: f64 = lon.trim().parse().map_err(|_| GeoError::Format {
                line: i + 1,
                msg: format!("bad longitude {lon:?}"),
            })?;
            let name = name.trim().to_string();
            if entries.iter().any(|(n, _)| *n == name) {
                return Err(GeoError::DuplicateStation(name));
            }
            entries.push((name, GeoPoint::new(lat, lon)?));
        }
        if entries.is_empty() {
            return Err(GeoError::EmptyRegistry);
        }
        Ok(StationRegistry { entries })
    }

    pub fn load(path: &Path) -> Result<StationRegistry, GeoError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StationRegistry::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, GeoPoint)> {
        self.entries.iter().map(|(n, p)| (n.as_str(), *p))
    }

    pub fn get(&self, station: &str) -> Option<GeoPoint> {
        self.entries
            .iter()
            .find(|(n, _)| n == station)
            .map(|(_, p)| *p)
    }

    /// Argmin of the haversine distance; exact ties go to the
    /// lexicographically smaller station id.
    pub fn nearest(&self, p: GeoPoint) -> Result<(&str, f64), GeoError> {
        let mut best: Option<(&str, f64)> = None;
        for (name, loc) in self.iter() {
            let d = haversine(p, loc);
            best = match best {
                None => Some((name, d)),
                Some((bn, bd)) => {
                    if d < bd || (d == bd && name < bn) {
                        Some((name, d))
                    } else {
                        Some((bn, bd))
                    }
                }
            };
        }
        best.ok_or(GeoError::EmptyRegistry)
    }
}
