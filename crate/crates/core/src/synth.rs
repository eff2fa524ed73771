//! Synthetic ground truth: a smooth covariate field over the domain, a known
//! occurrence surface, eBird-like observation sampling, prediction scoring,
//! and the observation CSV / `world.cfg` file formats.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::domain::{
    validate_observation, DomainBox, EnvVector, GeoPoint, Observation, ObservationSchema, RawObservation, SpeciesId,
    ValidationError, WeekIndex, WEEKS_PER_YEAR,
};
use crate::model::logistic;
use crate::seed;

const BUMP_STREAM: u64 = 1;
const WEIGHT_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: u64, source: ValidationError },
    #[error("evaluation labels are all {0}; AUC is undefined")]
    DegenerateLabels(&'static str),
    #[error("score count {scores} does not match label count {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("world config: {0}")]
    Config(String),
}

/// Shape parameters of a synthetic world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    pub n_bumps: usize,
    /// Gaussian bump width as a fraction of the shorter domain side.
    pub bump_width_frac: f64,
    /// Standard deviation of the drawn covariate weights.
    pub weight_scale: f64,
    pub bias: f64,
    pub seasonal_amplitude: f64,
    /// Week of peak occurrence.
    pub seasonal_phase: f64,
    /// Explicit `[bias, w_0, .., w_{D-1}]`; replaces the drawn weights and `bias`.
    pub weights: Option<Vec<f64>>,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            n_bumps: 16,
            bump_width_frac: 0.2,
            weight_scale: 2.0,
            bias: -0.5,
            seasonal_amplitude: 1.5,
            seasonal_phase: 26.0,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bump {
    lat: f64,
    lon: f64,
    amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWorld {
    pub seed: u64,
    pub domain: DomainBox,
    pub dim: usize,
    pub params: WorldParams,
    /// `[bias, w_0, .., w_{D-1}]`.
    pub true_weights: Vec<f64>,
    bumps: Vec<Vec<Bump>>,
    bump_sigma: f64,
}

pub fn generate_world(seed: u64, domain: DomainBox, dim: usize, params: WorldParams) -> Result<GroundTruthWorld, SynthError> {
    if dim == 0 {
        return Err(SynthError::Config("dimension must be at least 1".into()));
    }
    if let Some(w) = &params.weights {
        if w.len() != dim + 1 {
            return Err(SynthError::Config(format!("weights need {} entries, got {}", dim + 1, w.len())));
        }
    }
    if !(params.bump_width_frac > 0.0) {
        return Err(SynthError::Config("bump_width_frac must be positive".into()));
    }
    let mut bump_rng = seed::rng(seed::derive_seed(seed, BUMP_STREAM));
    let bumps = (0..dim)
        .map(|_| {
            (0..params.n_bumps)
                .map(|_| Bump {
                    lat: bump_rng.random_range(domain.lat_min..domain.lat_max),
                    lon: bump_rng.random_range(domain.lon_min..domain.lon_max),
                    amplitude: bump_rng.random_range(-1.0..1.0),
                })
                .collect()
        })
        .collect();
    let true_weights = match &params.weights {
        Some(w) => w.clone(),
        None => {
            let mut rng = seed::rng(seed::derive_seed(seed, WEIGHT_STREAM));
            let normal = Normal::new(0.0, params.weight_scale.abs()).map_err(|e| SynthError::Config(e.to_string()))?;
            std::iter::once(params.bias).chain((0..dim).map(|_| normal.sample(&mut rng))).collect()
        }
    };
    let bump_sigma = params.bump_width_frac * domain.lat_extent().min(domain.lon_extent());
    Ok(GroundTruthWorld { seed, domain, dim, params, true_weights, bumps, bump_sigma })
}

impl GroundTruthWorld {
    /// Covariates at a location: per dimension, `tanh` of a sum of Gaussian bumps,
    /// so every value lies in (-1, 1).
    pub fn env_at(&self, lat: f64, lon: f64) -> EnvVector {
        let two_s2 = 2.0 * self.bump_sigma * self.bump_sigma;
        let values = self
            .bumps
            .iter()
            .map(|bumps| {
                let s: f64 = bumps
                    .iter()
                    .map(|b| {
                        let d2 = (lat - b.lat).powi(2) + (lon - b.lon).powi(2);
                        b.amplitude * (-d2 / two_s2).exp()
                    })
                    .sum();
                s.tanh()
            })
            .collect();
        EnvVector::new(values, self.dim).expect("env field is finite by construction")
    }

    fn seasonal(&self, week: WeekIndex) -> f64 {
        let w = f64::from(week.get());
        self.params.seasonal_amplitude * (2.0 * PI * (w - self.params.seasonal_phase) / f64::from(WEEKS_PER_YEAR)).cos()
    }

    pub fn logit_with_env(&self, env: &EnvVector, week: WeekIndex) -> f64 {
        let w = &self.true_weights;
        w[0] + w[1..].iter().zip(env.values()).map(|(a, b)| a * b).sum::<f64>() + self.seasonal(week)
    }

    /// True occurrence probability.
    pub fn probability(&self, point: GeoPoint, week: WeekIndex) -> f64 {
        logistic(self.logit_with_env(&self.env_at(point.lat, point.lon), week))
    }

    /// Mean of `probability` over an `n x n` cell-centre grid and all 52 weeks.
    pub fn mean_probability(&self, n: usize) -> f64 {
        let d = &self.domain;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lat = d.lat_min + (i as f64 + 0.5) * d.lat_extent() / n as f64;
                let lon = d.lon_min + (j as f64 + 0.5) * d.lon_extent() / n as f64;
                let env = self.env_at(lat, lon);
                for week in WeekIndex::all() {
                    sum += logistic(self.logit_with_env(&env, week));
                }
            }
        }
        sum / (n * n * WEEKS_PER_YEAR as usize) as f64
    }

    /// Flat `key=value` description from which the world is regenerated.
    pub fn to_cfg(&self) -> String {
        let p = &self.params;
        let d = &self.domain;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("seed", self.seed.to_string());
        kv("lat_min", d.lat_min.to_string());
        kv("lat_max", d.lat_max.to_string());
        kv("lon_min", d.lon_min.to_string());
        kv("lon_max", d.lon_max.to_string());
        kv("dim", self.dim.to_string());
        kv("n_bumps", p.n_bumps.to_string());
        kv("bump_width_frac", p.bump_width_frac.to_string());
        kv("weight_scale", p.weight_scale.to_string());
        kv("bias", p.bias.to_string());
        kv("seasonal_amplitude", p.seasonal_amplitude.to_string());
        kv("seasonal_phase", p.seasonal_phase.to_string());
        if let Some(w) = &p.weights {
            kv("weights", w.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        }
        s
    }

    pub fn from_cfg(text: &str) -> Result<Self, SynthError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SynthError::Config(format!("line {}: expected key=value", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, SynthError> {
            let raw = map.get(key).ok_or_else(|| SynthError::Config(format!("missing key {key}")))?;
            raw.parse().map_err(|_| SynthError::Config(format!("bad value for {key}: {raw:?}")))
        }
        let domain = DomainBox::new(get(&map, "lat_min")?, get(&map, "lat_max")?, get(&map, "lon_min")?, get(&map, "lon_max")?)
            .map_err(|e| SynthError::Config(e.to_string()))?;
        let weights = match map.get("weights") {
            None => None,
            Some(raw) => Some(
                raw.split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| SynthError::Config(format!("bad weights {raw:?}")))?,
            ),
        };
        let params = WorldParams {
            n_bumps: get(&map, "n_bumps")?,
            bump_width_frac: get(&map, "bump_width_frac")?,
            weight_scale: get(&map, "weight_scale")?,
            bias: get(&map, "bias")?,
            seasonal_amplitude: get(&map, "seasonal_amplitude")?,
            seasonal_phase: get(&map, "seasonal_phase")?,
            weights,
        };
        generate_world(get(&map, "seed")?, domain, get(&map, "dim")?, params)
    }
}

/// Draw `n` observations: uniform location and week, log-uniform effort in
/// [0.1, 6] hours, presence ~ Bernoulli(p) and a present count of 1 + U{0,1,2}.
/// Ids run from 1 to `n`.
pub fn sample_observations(world: &GroundTruthWorld, n: usize, seed: u64, species: &SpeciesId) -> Vec<Observation> {
    let mut rng = seed::rng(seed);
    let d = &world.domain;
    let (lo, hi) = (0.1f64.ln(), 6.0f64.ln());
    (0..n)
        .map(|i| {
            let lat = rng.random_range(d.lat_min..d.lat_max);
            let lon = rng.random_range(d.lon_min..d.lon_max);
            let week = WeekIndex::new(rng.random_range(1..=i64::from(WEEKS_PER_YEAR))).expect("week in range");
            let effort_hours = rng.random_range(lo..=hi).exp().clamp(0.1, 6.0);
            let env = world.env_at(lat, lon);
            let p = logistic(world.logit_with_env(&env, week));
            let present = rng.random_bool(p);
            let count = if present { 1 + rng.random_range(0..=2u32) } else { 0 };
            Observation {
                id: i as u64 + 1,
                point: GeoPoint { lat, lon },
                week,
                effort_hours,
                species: species.clone(),
                count,
                env,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub point: GeoPoint,
    pub week: WeekIndex,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub brier: f64,
    pub n_points: usize,
}

/// Area under the ROC curve with tied scores sharing their mid-rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, SynthError> {
    if scores.len() != labels.len() {
        return Err(SynthError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(SynthError::DegenerateLabels("negative"));
    }
    if n_neg == 0 {
        return Err(SynthError::DegenerateLabels("positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Score predictions against fresh Bernoulli(p) labels drawn with `eval_seed`.
pub fn evaluate_predictions(
    predictions: &[ScoredPoint],
    world: &GroundTruthWorld,
    eval_seed: u64,
) -> Result<EvalReport, SynthError> {
    let mut rng = seed::rng(eval_seed);
    let labels: Vec<bool> = predictions.iter().map(|p| rng.random_bool(world.probability(p.point, p.week))).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let auc = auc(&scores, &labels)?;
    let brier = scores
        .iter()
        .zip(&labels)
        .map(|(s, &l)| (s - if l { 1.0 } else { 0.0 }).powi(2))
        .sum::<f64>()
        / scores.len() as f64;
    Ok(EvalReport { auc, brier, n_points: predictions.len() })
}

fn observation_header(dim: usize) -> Vec<String> {
    ["id", "lat", "lon", "week", "effort_hours", "species", "count"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|i| format!("env_{i}")))
        .collect()
}

/// Write observations as CSV. Reals use the shortest representation that
/// parses back to the same value.
pub fn write_observations_to<W: Write>(obs: &[Observation], dim: usize, out: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(observation_header(dim))?;
    for o in obs {
        if o.env.dim() != dim {
            return Err(SynthError::Header(format!("observation {} has {} covariates, header has {dim}", o.id, o.env.dim())));
        }
        let mut rec = vec![
            o.id.to_string(),
            o.point.lat.to_string(),
            o.point.lon.to_string(),
            o.week.to_string(),
            o.effort_hours.to_string(),
            o.species.to_string(),
            o.count.to_string(),
        ];
        rec.extend(o.env.values().iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_observations(obs: &[Observation], dim: usize, path: &Path) -> Result<(), SynthError> {
    write_observations_to(obs, dim, BufWriter::new(File::create(path)?))
}

/// Parse and validate an observation CSV against `domain`. The covariate
/// dimension is taken from the header.
pub fn read_observations_from<R: Read>(input: R, domain: &DomainBox) -> Result<Vec<Observation>, SynthError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let dim = header.len().saturating_sub(7);
    if header.len() < 7 || header != observation_header(dim) {
        return Err(SynthError::Header(format!("unexpected header {:?}", header.join(","))));
    }
    let schema = ObservationSchema { domain: *domain, dim };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |field: &str| SynthError::Row { line, message: format!("cannot parse {field}") };
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| row_err(&header[i]));
        let raw = RawObservation {
            id: rec[0].parse().map_err(|_| row_err("id"))?,
            lat: real(1)?,
            lon: real(2)?,
            week: rec[3].parse().map_err(|_| row_err("week"))?,
            effort_hours: real(4)?,
            species: rec[5].to_string(),
            count: rec[6].parse().map_err(|_| row_err("count"))?,
            env: (7..7 + dim).map(real).collect::<Result<_, _>>()?,
        };
        out.push(validate_observation(raw, &schema).map_err(|source| SynthError::Invalid { line, source })?);
    }
    Ok(out)
}

pub fn read_observations(path: &Path, domain: &DomainBox) -> Result<Vec<Observation>, SynthError> {
    read_observations_from(BufReader::new(File::open(path)?), domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn species() -> SpeciesId {
        SpeciesId::new("woothr").unwrap()
    }

    fn default_world(seed: u64) -> GroundTruthWorld {
        generate_world(seed, DomainBox::desk_default(), 8, WorldParams::default()).unwrap()
    }

    fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn same_seed_same_world() {
        assert_eq!(default_world(3).true_weights, default_world(3).true_weights);
        assert_ne!(default_world(3).true_weights, default_world(4).true_weights);
    }

    #[test]
    fn zero_amplitude_removes_seasonality() {
        let w = generate_world(1, DomainBox::desk_default(), 4, WorldParams { seasonal_amplitude: 0.0, ..Default::default() }).unwrap();
        let p = GeoPoint { lat: 3.0, lon: -40.0 };
        let p1 = w.probability(p, WeekIndex::new(1).unwrap());
        for week in WeekIndex::all() {
            assert_eq!(w.probability(p, week), p1);
        }
    }

    #[test]
    fn zero_weights_give_one_half() {
        let params = WorldParams { seasonal_amplitude: 0.0, weights: Some(vec![0.0, 0.0]), ..Default::default() };
        let w = generate_world(1, DomainBox::desk_default(), 1, params).unwrap();
        for (lat, lon) in [(-50.0, -100.0), (0.0, 0.0), (12.5, -77.0)] {
            assert_eq!(w.probability(GeoPoint { lat, lon }, WeekIndex::new(30).unwrap()), 0.5);
        }
    }

    #[test]
    fn env_field_is_bounded_and_smooth() {
        let w = default_world(9);
        let h = 1e-3;
        for i in 0..50 {
            let lat = -49.0 + 1.9 * i as f64;
            let lon = -99.0 + 1.7 * i as f64;
            let a = w.env_at(lat, lon);
            let b = w.env_at(lat + h, lon);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!(x.abs() < 1.0);
                // 16 unit bumps of width 20 degrees bound the slope well below 1 per degree.
                assert!(((x - y) / h).abs() < 1.0);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let w = default_world(2);
        assert!(sample_observations(&w, 0, 1, &species()).is_empty());
        let a = sample_observations(&w, 200, 5, &species());
        assert_eq!(a, sample_observations(&w, 200, 5, &species()));
        let schema = ObservationSchema { domain: w.domain, dim: 8 };
        for o in &a {
            assert!((0.1..=6.0).contains(&o.effort_hours));
            assert!(o.count <= 3);
            let raw = RawObservation {
                id: o.id,
                lat: o.point.lat,
                lon: o.point.lon,
                week: o.week.get() as i64,
                effort_hours: o.effort_hours,
                species: o.species.to_string(),
                count: o.count as i64,
                env: o.env.values().to_vec(),
            };
            assert_eq!(&validate_observation(raw, &schema).unwrap(), o);
        }
    }

    #[test]
    fn certain_presence_gives_positive_counts() {
        let params = WorldParams { weights: Some(vec![60.0, 0.0, 0.0]), seasonal_amplitude: 0.0, ..Default::default() };
        let w = generate_world(1, DomainBox::desk_default(), 2, params).unwrap();
        assert!(sample_observations(&w, 500, 3, &species()).iter().all(|o| o.count >= 1));
    }

    #[test]
    fn presence_rate_matches_mean_probability() {
        let w = default_world(11);
        let obs = sample_observations(&w, 10_000, 12, &species());
        let rate = obs.iter().filter(|o| o.is_present()).count() as f64 / obs.len() as f64;
        let mean_p = w.mean_probability(60);
        assert!((rate - mean_p).abs() < 0.03, "rate {rate} vs mean p {mean_p}");
        assert!(rate > 0.0 && rate < 1.0);
    }

    #[test]
    fn positive_weight_raises_probability() {
        let params = WorldParams { weights: Some(vec![0.1, 1.5, -0.7]), seasonal_amplitude: 0.0, ..Default::default() };
        let w = generate_world(1, DomainBox::desk_default(), 2, params).unwrap();
        let week = WeekIndex::new(1).unwrap();
        let lo = EnvVector::new(vec![-0.2, 0.3], 2).unwrap();
        let hi = EnvVector::new(vec![0.4, 0.3], 2).unwrap();
        assert!(logistic(w.logit_with_env(&hi, week)) > logistic(w.logit_with_env(&lo, week)));
    }

    #[test]
    fn auc_matches_brute_force_on_constant_scores() {
        let scores = vec![0.3; 20];
        let labels: Vec<bool> = (0..20).map(|i| i % 4 == 0).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
        assert_eq!(brute_force_auc(&scores, &labels), 0.5);
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(auc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(SynthError::DegenerateLabels(_))));
        assert!(auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn true_probability_beats_chance_and_reversal_loses() {
        let w = default_world(4);
        let mut rng = seed::rng(99);
        let pts: Vec<(GeoPoint, WeekIndex)> = (0..3000)
            .map(|_| {
                (
                    GeoPoint { lat: rng.random_range(-50.0..50.0), lon: rng.random_range(-100.0..0.0) },
                    WeekIndex::new(rng.random_range(1..=52)).unwrap(),
                )
            })
            .collect();
        let truth: Vec<ScoredPoint> = pts.iter().map(|&(point, week)| ScoredPoint { point, week, score: w.probability(point, week) }).collect();
        let reversed: Vec<ScoredPoint> = truth.iter().map(|s| ScoredPoint { score: 1.0 - s.score, ..*s }).collect();
        let good = evaluate_predictions(&truth, &w, 7).unwrap();
        let bad = evaluate_predictions(&reversed, &w, 7).unwrap();
        assert!(good.auc > 0.5 && bad.auc < 0.5, "{good:?} {bad:?}");
        assert!(good.brier < bad.brier);
        assert_eq!(good.n_points, 3000);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let w = default_world(6);
        let obs = sample_observations(&w, 100, 8, &species());
        let mut buf = Vec::new();
        write_observations_to(&obs, 8, &mut buf).unwrap();
        assert_eq!(read_observations_from(&buf[..], &w.domain).unwrap(), obs);

        let mut header_only = Vec::new();
        write_observations_to(&[], 3, &mut header_only).unwrap();
        assert_eq!(String::from_utf8(header_only.clone()).unwrap(), "id,lat,lon,week,effort_hours,species,count,env_0,env_1,env_2\n");
        assert!(read_observations_from(&header_only[..], &w.domain).unwrap().is_empty());

        let bad = "id,lat,lon,week,effort_hours,species,count,env_0\n1,0,-1,5,1,sp,0,0.5\n2,0,-1,53,1,sp,0,0.5\n";
        match read_observations_from(bad.as_bytes(), &w.domain) {
            Err(SynthError::Invalid { line: 3, source: ValidationError::WeekOutOfRange(53) }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let wrong_header = "id,lat,lon,week,effort,species,count\n";
        assert!(matches!(read_observations_from(wrong_header.as_bytes(), &w.domain), Err(SynthError::Header(_))));
        let garbage = "id,lat,lon,week,effort_hours,species,count\n1,x,-1,5,1,sp,0\n";
        assert!(matches!(read_observations_from(garbage.as_bytes(), &w.domain), Err(SynthError::Row { line: 2, .. })));
    }

    #[test]
    fn cfg_round_trip() {
        let w = default_world(21);
        let back = GroundTruthWorld::from_cfg(&w.to_cfg()).unwrap();
        assert_eq!(back, w);
        let params = WorldParams { weights: Some(vec![0.25, -1.0, 3.5]), ..Default::default() };
        let w2 = generate_world(5, DomainBox::new(0.0, 10.0, 0.0, 10.0).unwrap(), 2, params).unwrap();
        assert_eq!(GroundTruthWorld::from_cfg(&w2.to_cfg()).unwrap(), w2);
        assert!(GroundTruthWorld::from_cfg("seed=1\n").is_err());
    }

    proptest::proptest! {
        #[test]
        fn auc_equals_brute_force(
            scores in proptest::collection::vec(0u8..6, 2..120),
            labels_seed in 0u64..1000,
        ) {
            let mut rng = seed::rng(labels_seed);
            let mut labels: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            let s: Vec<f64> = scores.iter().map(|&v| f64::from(v) / 5.0).collect();
            proptest::prop_assert_eq!(auc(&s, &labels).unwrap(), brute_force_auc(&s, &labels));
        }
    }
}
