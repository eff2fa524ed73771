//! Stixel tilings: K complete lat x lon x week tilings of the domain, each
//! shifted by a seeded offset so that every point is covered by exactly one
//! stixel per layer.
//!
//! Cells are half-open `[low, high)` on every axis except at the domain's
//! maximum edge, which belongs to the last cell.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::domain::{DomainBox, GeoPoint, Observation, WeekIndex, WEEKS_PER_YEAR};
use crate::seed;

/// Stream tag separating layer-offset draws from other uses of the grid seed.
const OFFSET_STREAM: u64 = 0x6f66_6673_6574;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StixelConfig {
    /// Longitudinal cell size.
    pub cell_width_deg: f64,
    /// Latitudinal cell size.
    pub cell_height_deg: f64,
    pub window_weeks: u32,
    pub layers: u32,
    pub min_train: usize,
    pub seed: u64,
}

impl Default for StixelConfig {
    fn default() -> Self {
        Self { cell_width_deg: 10.0, cell_height_deg: 10.0, window_weeks: 4, layers: 10, min_train: 10, seed: 0 }
    }
}

impl StixelConfig {
    pub fn validate(&self, domain: &DomainBox) -> Result<(), ModelError> {
        for (name, size) in [("cell_width_deg", self.cell_width_deg), ("cell_height_deg", self.cell_height_deg)] {
            if !(size.is_finite() && size > 0.0) {
                return Err(ModelError::Config(format!("{name} must be positive, got {size}")));
            }
        }
        if self.cell_width_deg > domain.lon_extent() {
            return Err(ModelError::CellExceedsDomain {
                axis: "longitude",
                cell: self.cell_width_deg,
                extent: domain.lon_extent(),
            });
        }
        if self.cell_height_deg > domain.lat_extent() {
            return Err(ModelError::CellExceedsDomain {
                axis: "latitude",
                cell: self.cell_height_deg,
                extent: domain.lat_extent(),
            });
        }
        if !(1..=WEEKS_PER_YEAR).contains(&self.window_weeks) {
            return Err(ModelError::Config(format!("window_weeks must be in 1..=52, got {}", self.window_weeks)));
        }
        if self.layers == 0 {
            return Err(ModelError::Config("layers must be at least 1".into()));
        }
        if self.min_train == 0 {
            return Err(ModelError::Config("min_train must be at least 1".into()));
        }
        Ok(())
    }
}

/// Identifies one stixel. The derived ordering is the plan order:
/// layer, row, column, then week window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StixelId {
    pub layer: u32,
    pub row: u32,
    pub col: u32,
    pub window: u32,
}

impl fmt::Display for StixelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}-r{}-c{}-w{}", self.layer, self.row, self.col, self.window)
    }
}

impl FromStr for StixelId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadStixelId(s.to_string());
        let mut parts = s.split('-');
        let mut field = |prefix: char| -> Result<u32, ModelError> {
            let p = parts.next().ok_or_else(bad)?;
            p.strip_prefix(prefix).and_then(|n| n.parse().ok()).ok_or_else(bad)
        };
        let id = StixelId { layer: field('L')?, row: field('r')?, col: field('c')?, window: field('w')? };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(id)
    }
}

impl Serialize for StixelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StixelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A stixel's extent, clipped to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stixel {
    pub id: StixelId,
    pub week_start: WeekIndex,
    pub week_end: WeekIndex,
    pub lat_low: f64,
    pub lat_high: f64,
    pub lon_low: f64,
    pub lon_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerOffset {
    pub lat: f64,
    pub lon: f64,
    pub week: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub offset: LayerOffset,
    pub rows: u32,
    pub cols: u32,
    pub windows: u32,
}

/// One continuous axis of a shifted tiling.
#[derive(Debug, Clone, Copy)]
struct Axis {
    min: f64,
    max: f64,
    cell: f64,
    offset: f64,
}

impl Axis {
    fn raw_low(&self, i: u32) -> f64 {
        self.min - self.offset + f64::from(i) * self.cell
    }

    fn count(&self) -> u32 {
        let mut n = (((self.max - self.min) + self.offset) / self.cell).ceil().max(1.0) as u32;
        while n > 1 && self.raw_low(n - 1) >= self.max {
            n -= 1;
        }
        while self.raw_low(n) < self.max {
            n += 1;
        }
        n
    }

    fn bounds(&self, i: u32) -> (f64, f64) {
        (self.raw_low(i).max(self.min), self.raw_low(i + 1).min(self.max))
    }

    fn index(&self, v: f64, n: u32) -> u32 {
        let guess = ((v - self.min + self.offset) / self.cell).floor();
        let mut i = guess.clamp(0.0, f64::from(n - 1)) as u32;
        while i > 0 && v < self.raw_low(i) {
            i -= 1;
        }
        while i + 1 < n && v >= self.raw_low(i + 1) {
            i += 1;
        }
        i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StixelGridSet {
    pub config: StixelConfig,
    pub domain: DomainBox,
    pub layers: Vec<LayerShape>,
}

pub fn build_grids(config: StixelConfig, domain: DomainBox) -> Result<StixelGridSet, ModelError> {
    config.validate(&domain)?;
    let layers = (0..config.layers)
        .map(|layer| {
            let offset = layer_offset(&config, layer);
            let lat = Axis { min: domain.lat_min, max: domain.lat_max, cell: config.cell_height_deg, offset: offset.lat };
            let lon = Axis { min: domain.lon_min, max: domain.lon_max, cell: config.cell_width_deg, offset: offset.lon };
            LayerShape {
                offset,
                rows: lat.count(),
                cols: lon.count(),
                windows: (WEEKS_PER_YEAR + offset.week).div_ceil(config.window_weeks),
            }
        })
        .collect();
    Ok(StixelGridSet { config, domain, layers })
}

fn layer_offset(config: &StixelConfig, layer: u32) -> LayerOffset {
    if layer == 0 {
        return LayerOffset { lat: 0.0, lon: 0.0, week: 0 };
    }
    let mut rng = seed::rng(seed::derive_seed_path(config.seed, &[OFFSET_STREAM, u64::from(layer)]));
    LayerOffset {
        lat: rng.random_range(0.0..config.cell_height_deg),
        lon: rng.random_range(0.0..config.cell_width_deg),
        week: rng.random_range(0..config.window_weeks),
    }
}

impl StixelGridSet {
    pub fn n_layers(&self) -> u32 {
        self.layers.len() as u32
    }

    pub fn n_stixels(&self) -> usize {
        self.layers.iter().map(|l| l.rows as usize * l.cols as usize * l.windows as usize).sum()
    }

    fn lat_axis(&self, shape: &LayerShape) -> Axis {
        Axis {
            min: self.domain.lat_min,
            max: self.domain.lat_max,
            cell: self.config.cell_height_deg,
            offset: shape.offset.lat,
        }
    }

    fn lon_axis(&self, shape: &LayerShape) -> Axis {
        Axis {
            min: self.domain.lon_min,
            max: self.domain.lon_max,
            cell: self.config.cell_width_deg,
            offset: shape.offset.lon,
        }
    }

    fn window_of(&self, shape: &LayerShape, week: WeekIndex) -> u32 {
        (week.zero_based() + shape.offset.week) / self.config.window_weeks
    }

    /// Geometry of a stixel, or `None` if the id is not part of this grid set.
    pub fn stixel(&self, id: StixelId) -> Option<Stixel> {
        let shape = self.layers.get(id.layer as usize)?;
        if id.row >= shape.rows || id.col >= shape.cols || id.window >= shape.windows {
            return None;
        }
        let (lat_low, lat_high) = self.lat_axis(shape).bounds(id.row);
        let (lon_low, lon_high) = self.lon_axis(shape).bounds(id.col);
        let w = self.config.window_weeks as i64;
        let off = shape.offset.week as i64;
        let start0 = (i64::from(id.window) * w - off).max(0);
        let end0 = ((i64::from(id.window) + 1) * w - off - 1).min(WEEKS_PER_YEAR as i64 - 1);
        Some(Stixel {
            id,
            week_start: WeekIndex::new(start0 + 1).ok()?,
            week_end: WeekIndex::new(end0 + 1).ok()?,
            lat_low,
            lat_high,
            lon_low,
            lon_high,
        })
    }

    /// Every stixel in plan order.
    pub fn stixels(&self) -> Vec<Stixel> {
        let mut out = Vec::with_capacity(self.n_stixels());
        for (layer, shape) in self.layers.iter().enumerate() {
            for row in 0..shape.rows {
                for col in 0..shape.cols {
                    for window in 0..shape.windows {
                        let id = StixelId { layer: layer as u32, row, col, window };
                        out.extend(self.stixel(id));
                    }
                }
            }
        }
        out
    }

    pub fn contains_id(&self, id: StixelId) -> bool {
        self.stixel(id).is_some()
    }

    fn locate_unchecked(&self, layer: u32, lat: f64, lon: f64, week: WeekIndex) -> StixelId {
        let shape = &self.layers[layer as usize];
        StixelId {
            layer,
            row: self.lat_axis(shape).index(lat, shape.rows),
            col: self.lon_axis(shape).index(lon, shape.cols),
            window: self.window_of(shape, week),
        }
    }

    /// The stixel of `layer` containing `(point, week)`.
    pub fn locate(&self, layer: u32, point: GeoPoint, week: WeekIndex) -> Result<StixelId, ModelError> {
        if !self.domain.contains(point.lat, point.lon) {
            return Err(ModelError::OutsideDomain { lat: point.lat, lon: point.lon });
        }
        if layer >= self.n_layers() {
            return Err(ModelError::Config(format!("layer {layer} out of range")));
        }
        Ok(self.locate_unchecked(layer, point.lat, point.lon, week))
    }
}

/// Ids of all stixels containing `(point, week)`: exactly one per layer, in layer order.
pub fn stixels_covering(grids: &StixelGridSet, point: GeoPoint, week: WeekIndex) -> Result<Vec<StixelId>, ModelError> {
    if !grids.domain.contains(point.lat, point.lon) {
        return Err(ModelError::OutsideDomain { lat: point.lat, lon: point.lon });
    }
    Ok((0..grids.n_layers()).map(|layer| grids.locate_unchecked(layer, point.lat, point.lon, week)).collect())
}

/// Map each stixel to the ids of the observations it contains, ascending.
/// Stixels with no observations are absent from the map.
pub fn assign_observations(
    obs: &[Observation],
    grids: &StixelGridSet,
) -> Result<BTreeMap<StixelId, Vec<u64>>, ModelError> {
    let mut out: BTreeMap<StixelId, Vec<u64>> = BTreeMap::new();
    for o in obs {
        if !grids.domain.contains(o.point.lat, o.point.lon) {
            return Err(ModelError::ObservationOutsideDomain { id: o.id });
        }
        for layer in 0..grids.n_layers() {
            let id = grids.locate_unchecked(layer, o.point.lat, o.point.lon, o.week);
            out.entry(id).or_default().push(o.id);
        }
    }
    for ids in out.values_mut() {
        ids.sort_unstable();
    }
    Ok(out)
}
