use std::fmt;

use serde::{Deserialize, Serialize};

use super::ExecError;
use crate::domain::{DomainBox, Observation, SpeciesId};
use crate::model::{assign_observations, build_grids, index_observations, stixel_seed, StixelConfig, StixelGridSet, StixelId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub species: SpeciesId,
    pub stixel: StixelId,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.species, self.stixel)
    }
}

/// Simulated task cost: `base + per_observation * |input|` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub base_seconds: f64,
    pub per_observation_seconds: f64,
}

impl Default for DurationModel {
    fn default() -> Self {
        Self { base_seconds: 2.0, per_observation_seconds: 0.05 }
    }
}

impl DurationModel {
    pub fn duration(&self, n_inputs: usize) -> f64 {
        self.base_seconds + self.per_observation_seconds * n_inputs as f64
    }

    /// Keep `base_seconds` and choose the per-observation cost so that a plan
    /// with `n_tasks` tasks and `n_inputs` total input references costs
    /// `core_hours` when run without failures.
    pub fn calibrated(base_seconds: f64, core_hours: f64, n_tasks: usize, n_inputs: usize) -> Result<Self, ExecError> {
        let budget = core_hours * 3600.0 - base_seconds * n_tasks as f64;
        if n_inputs == 0 || !(budget > 0.0) {
            return Err(ExecError::Config(format!(
                "cannot reach {core_hours} core-hours with {n_tasks} tasks of {base_seconds}s base cost"
            )));
        }
        Ok(Self { base_seconds, per_observation_seconds: budget / n_inputs as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    /// Ids of the observations in this stixel, ascending.
    pub input: Vec<u64>,
    pub seed: u64,
    pub estimated_duration: f64,
}

impl TaskSpec {
    /// FNV-1a digest of everything that determines the task's result.
    pub fn digest(&self, min_train: usize) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.id.to_string().as_bytes());
        eat(&self.seed.to_le_bytes());
        eat(&(min_train as u64).to_le_bytes());
        for id in &self.input {
            eat(&id.to_le_bytes());
        }
        h
    }
}

/// The complete, ordered task set for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub species: SpeciesId,
    pub grids: StixelGridSet,
    pub min_train: usize,
    pub tasks: Vec<TaskSpec>,
}

impl Plan {
    pub fn total_estimated_seconds(&self) -> f64 {
        self.tasks.iter().map(|t| t.estimated_duration).sum()
    }

    pub fn total_inputs(&self) -> usize {
        self.tasks.iter().map(|t| t.input.len()).sum()
    }
}

/// One task per non-empty stixel, ordered by (layer, row, col, week window).
pub fn plan_tasks(
    species: &SpeciesId,
    obs: &[Observation],
    config: StixelConfig,
    domain: DomainBox,
    duration: DurationModel,
) -> Result<Plan, ExecError> {
    index_observations(species, obs)?;
    let grids = build_grids(config, domain)?;
    let tasks = assign_observations(obs, &grids)?
        .into_iter()
        .map(|(stixel, input)| TaskSpec {
            id: TaskId { species: species.clone(), stixel },
            seed: stixel_seed(config.seed, stixel),
            estimated_duration: duration.duration(input.len()),
            input,
        })
        .collect();
    Ok(Plan { species: species.clone(), grids, min_train: config.min_train, tasks })
}
