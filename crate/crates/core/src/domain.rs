//! Core value types: locations, weeks, covariates and observations.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const WEEKS_PER_YEAR: u32 = 52;

/// Validation failures for the domain value types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("latitude out of range: {0}")]
    LatitudeOutOfRange(f64),
    #[error("longitude out of range: {0}")]
    LongitudeOutOfRange(f64),
    #[error("week out of range: {0}")]
    WeekOutOfRange(i64),
    #[error("negative count: {0}")]
    NegativeCount(i64),
    #[error("non-positive effort: {0}")]
    NonPositiveEffort(f64),
    #[error("env length mismatch: expected {expected}, got {actual}")]
    EnvLengthMismatch { expected: usize, actual: usize },
    #[error("non-finite env value at index {0}")]
    NonFiniteEnv(usize),
    #[error("invalid species identifier {0:?}")]
    InvalidSpecies(String),
    #[error("invalid domain box: {0}")]
    InvalidDomain(String),
}

/// Rectangular lat/lon region the pipeline operates on. Weeks always span 1..=52.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl DomainBox {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, ValidationError> {
        let all_finite = [lat_min, lat_max, lon_min, lon_max].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(ValidationError::InvalidDomain("bounds must be finite".into()));
        }
        if !(lat_min < lat_max) {
            return Err(ValidationError::InvalidDomain(format!("lat_min {lat_min} >= lat_max {lat_max}")));
        }
        if !(lon_min < lon_max) {
            return Err(ValidationError::InvalidDomain(format!("lon_min {lon_min} >= lon_max {lon_max}")));
        }
        if lat_min < -90.0 || lat_max > 90.0 {
            return Err(ValidationError::InvalidDomain("latitude bounds exceed [-90, 90]".into()));
        }
        if lon_min < -180.0 || lon_max > 180.0 {
            return Err(ValidationError::InvalidDomain("longitude bounds exceed [-180, 180]".into()));
        }
        Ok(Self { lat_min, lat_max, lon_min, lon_max })
    }

    /// The 100° x 100° box used by desk-scale runs.
    pub fn desk_default() -> Self {
        Self { lat_min: -50.0, lat_max: 50.0, lon_min: -100.0, lon_max: 0.0 }
    }

    pub fn lat_extent(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn lon_extent(&self) -> f64 {
        self.lon_max - self.lon_min
    }

    /// Closed-interval containment on both axes.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    /// Whether `other` lies entirely inside this box.
    pub fn encloses(&self, other: &DomainBox) -> bool {
        self.contains(other.lat_min, other.lon_min) && self.contains(other.lat_max, other.lon_max)
    }
}

impl Default for DomainBox {
    fn default() -> Self {
        Self::desk_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, domain: &DomainBox) -> Result<Self, ValidationError> {
        if !lat.is_finite() || lat < domain.lat_min || lat > domain.lat_max {
            return Err(ValidationError::LatitudeOutOfRange(lat));
        }
        if !lon.is_finite() || lon < domain.lon_min || lon > domain.lon_max {
            return Err(ValidationError::LongitudeOutOfRange(lon));
        }
        Ok(Self { lat, lon })
    }
}

/// One of the 52 weekly prediction days, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct WeekIndex(u32);

impl WeekIndex {
    pub fn new(week: i64) -> Result<Self, ValidationError> {
        if (1..=WEEKS_PER_YEAR as i64).contains(&week) {
            Ok(Self(week as u32))
        } else {
            Err(ValidationError::WeekOutOfRange(week))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position within the year.
    pub fn zero_based(self) -> u32 {
        self.0 - 1
    }

    pub fn all() -> impl Iterator<Item = WeekIndex> {
        (1..=WEEKS_PER_YEAR).map(WeekIndex)
    }
}

impl TryFrom<u32> for WeekIndex {
    type Error = ValidationError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        WeekIndex::new(v as i64)
    }
}

impl From<WeekIndex> for u32 {
    fn from(w: WeekIndex) -> u32 {
        w.0
    }
}

impl fmt::Display for WeekIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Environmental covariates at a location. The length is fixed per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvVector(Vec<f64>);

impl EnvVector {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self, ValidationError> {
        if values.len() != dim {
            return Err(ValidationError::EnvLengthMismatch { expected: dim, actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFiniteEnv(i));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Opaque species code. Restricted to `[A-Za-z0-9_.-]` so it is safe in CSV
/// cells and file paths.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpeciesId(String);

impl SpeciesId {
    pub fn new(code: impl Into<String>) -> Result<Self, ValidationError> {
        let code = code.into();
        let ok = !code.is_empty()
            && code != "."
            && code != ".."
            && code.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if ok {
            Ok(Self(code))
        } else {
            Err(ValidationError::InvalidSpecies(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SpeciesId {
    type Error = ValidationError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        SpeciesId::new(s)
    }
}

impl From<SpeciesId> for String {
    fn from(s: SpeciesId) -> String {
        s.0
    }
}

impl fmt::Display for SpeciesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One search record. Presence is `count > 0` and is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: u64,
    pub point: GeoPoint,
    pub week: WeekIndex,
    pub effort_hours: f64,
    pub species: SpeciesId,
    pub count: u32,
    pub env: EnvVector,
}

impl Observation {
    pub fn is_present(&self) -> bool {
        self.count > 0
    }
}

/// Unvalidated observation fields, as read from a file or built by a caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservation {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    pub week: i64,
    pub effort_hours: f64,
    pub species: String,
    pub count: i64,
    pub env: Vec<f64>,
}

/// Run-level validation context: the domain and covariate dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationSchema {
    pub domain: DomainBox,
    pub dim: usize,
}

pub fn validate_observation(raw: RawObservation, schema: &ObservationSchema) -> Result<Observation, ValidationError> {
    let point = GeoPoint::new(raw.lat, raw.lon, &schema.domain)?;
    let week = WeekIndex::new(raw.week)?;
    if !(raw.effort_hours > 0.0) || !raw.effort_hours.is_finite() {
        return Err(ValidationError::NonPositiveEffort(raw.effort_hours));
    }
    if raw.count < 0 {
        return Err(ValidationError::NegativeCount(raw.count));
    }
    let count = u32::try_from(raw.count).map_err(|_| ValidationError::NegativeCount(raw.count))?;
    let species = SpeciesId::new(raw.species)?;
    let env = EnvVector::new(raw.env, schema.dim)?;
    Ok(Observation { id: raw.id, point, week, effort_hours: raw.effort_hours, species, count, env })
}
