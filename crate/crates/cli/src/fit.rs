use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use stixelflow::domain::{DomainBox, GeoPoint, Observation, SpeciesId, WeekIndex};
use stixelflow::exec::{estimate_core_hours, plan_tasks, run_pipeline, CheckpointStore, DurationModel, LocalFleet, RunOptions};
use stixelflow::model::table::write_predictions;
use stixelflow::model::{predict_grid, FittedEnsemble, LogisticGd, StixelConfig};
use stixelflow::seed::derive_seed;
use stixelflow::synth::{generate_world, read_observations_from, sample_observations, write_observations, GroundTruthWorld, WorldParams};

use crate::{FitArgs, GenerateArgs, PredictArgs};

const SAMPLE_STREAM: u64 = 0x6f62_73;

pub fn parse_bbox(s: &str) -> Result<DomainBox> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad bbox {s:?}: expected lat_min,lat_max,lon_min,lon_max"))?;
    ensure!(v.len() == 4, "bad bbox {s:?}: expected 4 numbers, got {}", v.len());
    Ok(DomainBox::new(v[0], v[1], v[2], v[3])?)
}

/// `N` or inclusive `A..B`.
pub fn parse_weeks(s: &str) -> Result<Vec<WeekIndex>> {
    let parse = |x: &str| -> Result<WeekIndex> {
        let n: i64 = x.trim().parse().with_context(|| format!("bad week {x:?}"))?;
        Ok(WeekIndex::new(n)?)
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let w = parse(s)?;
            (w, w)
        }
    };
    ensure!(a <= b, "empty week range {s:?}");
    Ok((a.get()..=b.get()).map(|w| WeekIndex::new(i64::from(w)).expect("in range")).collect())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StixelSection {
    cell_width_deg: Option<f64>,
    cell_height_deg: Option<f64>,
    window_weeks: Option<u32>,
    layers: Option<u32>,
    min_train: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LearnerSection {
    iterations: Option<usize>,
    step: Option<f64>,
    l2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DurationSection {
    base_seconds: Option<f64>,
    per_observation_seconds: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    stixel: StixelSection,
    domain: Option<DomainBox>,
    learner: LearnerSection,
    duration: DurationSection,
}

#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub stixel: StixelConfig,
    pub domain: DomainBox,
    pub learner: LogisticGd,
    pub duration: DurationModel,
}

/// Defaults, overridden by the config file. The grid seed falls back to `--seed`.
pub fn load_settings(path: Option<&Path>, seed: u64) -> Result<FitSettings> {
    let file: ConfigFile = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ConfigFile::default(),
    };
    let d = StixelConfig::default();
    let s = file.stixel;
    let stixel = StixelConfig {
        cell_width_deg: s.cell_width_deg.unwrap_or(d.cell_width_deg),
        cell_height_deg: s.cell_height_deg.unwrap_or(d.cell_height_deg),
        window_weeks: s.window_weeks.unwrap_or(d.window_weeks),
        layers: s.layers.unwrap_or(d.layers),
        min_train: s.min_train.unwrap_or(d.min_train),
        seed: s.seed.unwrap_or(seed),
    };
    let domain = match file.domain {
        Some(b) => DomainBox::new(b.lat_min, b.lat_max, b.lon_min, b.lon_max)?,
        None => DomainBox::desk_default(),
    };
    let l = LogisticGd::default();
    let learner = LogisticGd {
        iterations: file.learner.iterations.unwrap_or(l.iterations),
        step: file.learner.step.unwrap_or(l.step),
        l2: file.learner.l2.unwrap_or(l.l2),
    };
    let dm = DurationModel::default();
    let duration = DurationModel {
        base_seconds: file.duration.base_seconds.unwrap_or(dm.base_seconds),
        per_observation_seconds: file.duration.per_observation_seconds.unwrap_or(dm.per_observation_seconds),
    };
    ensure!(
        duration.base_seconds >= 0.0 && duration.per_observation_seconds >= 0.0,
        "task durations must be non-negative"
    );
    stixel.validate(&domain)?;
    Ok(FitSettings { stixel, domain, learner, duration })
}

/// Read an observation CSV. A file with no content at all holds no observations.
pub fn load_observations(path: &Path, domain: &DomainBox) -> Result<Vec<Observation>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(Vec::new());
    }
    read_observations_from(&bytes[..], domain).with_context(|| format!("{}", path.display()))
}

pub fn resolve_species(flag: Option<&str>, obs: &[Observation]) -> Result<SpeciesId> {
    Ok(match (flag, obs.first()) {
        (Some(s), _) => SpeciesId::new(s)?,
        (None, Some(o)) => o.species.clone(),
        (None, None) => SpeciesId::new("unknown")?,
    })
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn generate(args: &GenerateArgs, seed: u64) -> Result<()> {
    let domain = match &args.bbox {
        Some(b) => parse_bbox(b)?,
        None => DomainBox::desk_default(),
    };
    let species = SpeciesId::new(args.species.as_str())?;
    let world = generate_world(seed, domain, args.dim, WorldParams::default())?;
    let obs = sample_observations(&world, args.n_obs, derive_seed(seed, SAMPLE_STREAM), &species);
    create_parent(&args.out)?;
    write_observations(&obs, args.dim, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let world_out = args.world_out.clone().unwrap_or_else(|| args.out.with_file_name("world.cfg"));
    write_file(&world_out, world.to_cfg().as_bytes())?;
    println!("wrote {} observations to {}", obs.len(), args.out.display());
    println!("wrote world description to {}", world_out.display());
    Ok(())
}

pub fn fit(args: &FitArgs, seed: u64) -> Result<()> {
    ensure!(args.workers >= 1, "--workers must be at least 1");
    let settings = load_settings(args.config.as_deref(), seed)?;
    let obs = load_observations(&args.obs, &settings.domain)?;
    let species = resolve_species(args.species.as_deref(), &obs)?;
    let plan = plan_tasks(&species, &obs, settings.stixel, settings.domain, settings.duration)?;
    let store = CheckpointStore::open(args.out_dir.join("checkpoints"))?;
    let opts = RunOptions { threads: args.workers, halt_at: None, release_idle: false };
    let out = run_pipeline(&plan, &obs, &settings.learner, &LocalFleet::new(args.workers, 1).specs(), &store, opts)?;

    write_file(&args.out_dir.join("ensemble.json"), &out.ensemble.to_json_bytes())?;
    let mut record = serde_json::to_vec_pretty(&out.record)?;
    record.push(b'\n');
    write_file(&args.out_dir.join("run_record.json"), &record)?;

    println!("species: {}", species);
    println!("n_observations: {}", obs.len());
    println!("n_stixels: {}", plan.grids.n_stixels());
    println!("n_tasks: {}", plan.tasks.len());
    println!("n_reused: {}", out.record.n_reused);
    println!("n_models: {}", out.ensemble.models.len());
    println!("core_hours: {:.4}", estimate_core_hours(&out.record));
    println!("ensemble: {}", args.out_dir.join("ensemble.json").display());
    Ok(())
}

/// Cell-centre grid over `bbox`, north to south, west to east. Edge cells
/// are clipped to the box and use the centre of the clipped cell.
pub fn grid_points(bbox: &DomainBox, res: f64) -> Result<Vec<GeoPoint>> {
    ensure!(res > 0.0 && res.is_finite(), "--grid-res must be positive");
    let cells = |extent: f64| ((extent / res) - 1e-9).ceil().max(1.0) as usize;
    let (n_lat, n_lon) = (cells(bbox.lat_extent()), cells(bbox.lon_extent()));
    ensure!(n_lat.saturating_mul(n_lon) <= 10_000_000, "grid of {n_lat}x{n_lon} points is too large");
    let mut points = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        let top = bbox.lat_max - i as f64 * res;
        let bottom = (top - res).max(bbox.lat_min);
        for j in 0..n_lon {
            let left = bbox.lon_min + j as f64 * res;
            let right = (left + res).min(bbox.lon_max);
            points.push(GeoPoint { lat: (top + bottom) / 2.0, lon: (left + right) / 2.0 });
        }
    }
    Ok(points)
}

fn load_world(path: &PathBuf) -> Result<GroundTruthWorld> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    GroundTruthWorld::from_cfg(&text).with_context(|| format!("{}", path.display()))
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let bytes = fs::read(&args.ensemble).with_context(|| format!("reading ensemble {}", args.ensemble.display()))?;
    let ensemble = FittedEnsemble::from_json_bytes(&bytes).with_context(|| format!("{}", args.ensemble.display()))?;
    let world = load_world(&args.world)?;
    let domain = ensemble.grids.domain;
    let bbox = match &args.bbox {
        Some(b) => parse_bbox(b)?,
        None => domain,
    };
    if !domain.encloses(&bbox) {
        bail!("prediction box {bbox:?} lies outside the ensemble domain {domain:?}");
    }
    if let Some(m) = ensemble.models.values().next() {
        ensure!(
            m.weights.len() == world.dim + 1,
            "world has {} covariates but the ensemble was fitted on {}",
            world.dim,
            m.weights.len() - 1
        );
    }
    let weeks = parse_weeks(&args.weeks)?;
    let points: Vec<_> = grid_points(&bbox, args.grid_res)?
        .into_iter()
        .map(|p| (p, world.env_at(p.lat, p.lon)))
        .collect();
    let rows = predict_grid(&ensemble, &LogisticGd::default(), &points, &weeks)?;
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_predictions(&rows, &mut w)?;
    w.flush()?;
    println!("wrote {} predictions ({} points x {} weeks) to {}", rows.len(), points.len(), weeks.len(), args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_syntax() {
        assert_eq!(parse_weeks("26").unwrap().len(), 1);
        assert_eq!(parse_weeks("1..52").unwrap().len(), 52);
        assert_eq!(parse_weeks("3..5").unwrap().iter().map(|w| w.get()).collect::<Vec<_>>(), vec![3, 4, 5]);
        assert!(parse_weeks("0").is_err());
        assert!(parse_weeks("5..3").is_err());
        assert!(parse_weeks("x").is_err());
    }

    #[test]
    fn grid_is_cell_centred_north_first() {
        let pts = grid_points(&DomainBox::desk_default(), 10.0).unwrap();
        assert_eq!(pts.len(), 100);
        assert_eq!(pts[0], GeoPoint { lat: 45.0, lon: -95.0 });
        assert_eq!(pts[99], GeoPoint { lat: -45.0, lon: -5.0 });
        let clipped = grid_points(&DomainBox::new(0.0, 10.0, 0.0, 25.0).unwrap(), 10.0).unwrap();
        assert_eq!(clipped.len(), 3);
        assert_eq!(clipped[2].lon, 22.5);
    }

    #[test]
    fn config_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fit.toml");
        fs::write(&p, "[stixel]\nlayers = 3\n\n[learner]\niterations = 50\n").unwrap();
        let s = load_settings(Some(&p), 9).unwrap();
        assert_eq!(s.stixel.layers, 3);
        assert_eq!(s.stixel.seed, 9);
        assert_eq!(s.learner.iterations, 50);
        fs::write(&p, "[stixel]\nbogus = 1\n").unwrap();
        assert!(load_settings(Some(&p), 0).is_err());
    }
}
