//! Per-stixel training and ensemble prediction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::grid::{assign_observations, build_grids, stixels_covering, StixelConfig, StixelGridSet, StixelId};
use super::learner::{Learner, TrainingSample};
use super::ModelError;
use crate::domain::{DomainBox, EnvVector, GeoPoint, Observation, SpeciesId, WeekIndex};
use crate::seed;

const TASK_STREAM: u64 = 0x7461_736b;

/// Seed handed to the learner for one stixel. Depends only on the grid seed and the id.
pub fn stixel_seed(grid_seed: u64, id: StixelId) -> u64 {
    seed::derive_seed_path(
        grid_seed,
        &[TASK_STREAM, u64::from(id.layer), u64::from(id.row), u64::from(id.col), u64::from(id.window)],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StixelModel {
    pub stixel: StixelId,
    /// Bias first, then one weight per covariate.
    pub weights: Vec<f64>,
    pub n_train: usize,
    pub mean_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainOutcome {
    Model(StixelModel),
    InsufficientData { stixel: StixelId, n_train: usize },
}

impl TrainOutcome {
    pub fn model(&self) -> Option<&StixelModel> {
        match self {
            TrainOutcome::Model(m) => Some(m),
            TrainOutcome::InsufficientData { .. } => None,
        }
    }
}

/// Train one stixel's model. The subset is sorted by observation id before
/// training, so the caller's ordering never matters.
pub fn train_stixel(
    stixel: StixelId,
    subset: &[&Observation],
    learner: &dyn Learner,
    min_train: usize,
    seed: u64,
) -> Result<TrainOutcome, ModelError> {
    if subset.len() < min_train {
        return Ok(TrainOutcome::InsufficientData { stixel, n_train: subset.len() });
    }
    let mut sorted: Vec<&Observation> = subset.to_vec();
    sorted.sort_by_key(|o| o.id);
    let samples: Vec<TrainingSample<'_>> =
        sorted.iter().map(|o| TrainingSample { env: o.env.values(), present: o.is_present() }).collect();
    let weights = learner.train(&samples, seed)?;
    let mean_count = sorted.iter().map(|o| f64::from(o.count)).sum::<f64>() / sorted.len() as f64;
    Ok(TrainOutcome::Model(StixelModel { stixel, weights, n_train: sorted.len(), mean_count }))
}

/// Ensemble prediction at one place and week. `occurrence` and `abundance`
/// are `None` exactly when no covering stixel has a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub occurrence: Option<f64>,
    pub abundance: Option<f64>,
    pub n_contributing: usize,
}

impl EnsemblePrediction {
    pub fn absent() -> Self {
        Self { occurrence: None, abundance: None, n_contributing: 0 }
    }

    /// Arithmetic mean over `(occurrence, abundance)` member pairs.
    pub fn average(members: &[(f64, f64)]) -> Self {
        if members.is_empty() {
            return Self::absent();
        }
        let n = members.len() as f64;
        let mean = |v: &dyn Fn(&(f64, f64)) -> f64| {
            let first = v(&members[0]);
            if members.iter().all(|m| v(m) == first) {
                first
            } else {
                members.iter().map(v).sum::<f64>() / n
            }
        };
        let occ = mean(&|m| m.0);
        let abd = mean(&|m| m.1);
        Self { occurrence: Some(occ.clamp(0.0, 1.0)), abundance: Some(abd), n_contributing: members.len() }
    }

    pub fn is_absent(&self) -> bool {
        self.n_contributing == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEnsemble {
    pub species: SpeciesId,
    pub grids: StixelGridSet,
    pub models: BTreeMap<StixelId, StixelModel>,
}

impl FittedEnsemble {
    pub fn new(species: SpeciesId, grids: StixelGridSet) -> Self {
        Self { species, grids, models: BTreeMap::new() }
    }

    pub fn insert(&mut self, model: StixelModel) -> Result<(), ModelError> {
        if !self.grids.contains_id(model.stixel) {
            return Err(ModelError::UnknownStixel(model.stixel.to_string()));
        }
        self.models.insert(model.stixel, model);
        Ok(())
    }

    pub fn predict_point(
        &self,
        learner: &dyn Learner,
        env: &EnvVector,
        point: GeoPoint,
        week: WeekIndex,
    ) -> Result<EnsemblePrediction, ModelError> {
        let members: Vec<(f64, f64)> = stixels_covering(&self.grids, point, week)?
            .iter()
            .filter_map(|id| self.models.get(id))
            .map(|m| (learner.predict_probability(&m.weights, env.values()), m.mean_count))
            .collect();
        Ok(EnsemblePrediction::average(&members))
    }

    /// Compact JSON encoding; map ordering is fixed so equal ensembles encode to equal bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("ensemble serialization cannot fail")
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let ens: FittedEnsemble = serde_json::from_slice(bytes).map_err(|e| ModelError::Decode(e.to_string()))?;
        for (id, m) in &ens.models {
            if *id != m.stixel || !ens.grids.contains_id(*id) {
                return Err(ModelError::UnknownStixel(id.to_string()));
            }
        }
        Ok(ens)
    }
}

/// Check that ids are unique and every record belongs to `species`.
pub fn index_observations<'a>(
    species: &SpeciesId,
    obs: &'a [Observation],
) -> Result<HashMap<u64, &'a Observation>, ModelError> {
    let mut index = HashMap::with_capacity(obs.len());
    for o in obs {
        if &o.species != species {
            return Err(ModelError::MixedSpecies { expected: species.to_string(), found: o.species.to_string() });
        }
        if index.insert(o.id, o).is_some() {
            return Err(ModelError::DuplicateObservationId(o.id));
        }
    }
    Ok(index)
}

/// Build grids, assign observations and train every non-empty stixel, serially.
pub fn fit_species(
    species: &SpeciesId,
    obs: &[Observation],
    config: StixelConfig,
    domain: DomainBox,
    learner: &dyn Learner,
) -> Result<FittedEnsemble, ModelError> {
    let index = index_observations(species, obs)?;
    let grids = build_grids(config, domain)?;
    let assignment = assign_observations(obs, &grids)?;
    let mut ensemble = FittedEnsemble::new(species.clone(), grids);
    for (id, ids) in &assignment {
        let subset: Vec<&Observation> = ids.iter().map(|i| index[i]).collect();
        let outcome = train_stixel(*id, &subset, learner, config.min_train, stixel_seed(config.seed, *id))?;
        if let TrainOutcome::Model(m) = outcome {
            ensemble.insert(m)?;
        }
    }
    Ok(ensemble)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub point: GeoPoint,
    pub week: WeekIndex,
    pub prediction: EnsemblePrediction,
}

/// Predict every `(point, week)` pair, point-major in input order.
pub fn predict_grid(
    ensemble: &FittedEnsemble,
    learner: &dyn Learner,
    points: &[(GeoPoint, EnvVector)],
    weeks: &[WeekIndex],
) -> Result<Vec<PredictionRow>, ModelError> {
    let mut rows = Vec::with_capacity(points.len() * weeks.len());
    for (point, env) in points {
        for &week in weeks {
            let prediction = ensemble.predict_point(learner, env, *point, week)?;
            rows.push(PredictionRow { point: *point, week, prediction });
        }
    }
    Ok(rows)
}
