//! The three-step stixel computation: assign observations to stixels, train
//! one model per stixel, and average the predictions of all stixels covering
//! a query point and week.

pub mod ensemble;
pub mod grid;
pub mod learner;
pub mod table;

use thiserror::Error;

pub use ensemble::{
    fit_species, index_observations, predict_grid, stixel_seed, train_stixel, EnsemblePrediction, FittedEnsemble,
    PredictionRow, StixelModel, TrainOutcome,
};
pub use grid::{
    assign_observations, build_grids, stixels_covering, LayerOffset, LayerShape, Stixel, StixelConfig,
    StixelGridSet, StixelId,
};
pub use learner::{logistic, Learner, LogisticGd, TrainingSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid stixel configuration: {0}")]
    Config(String),
    #[error("{axis} cell size {cell} exceeds domain extent {extent}")]
    CellExceedsDomain { axis: &'static str, cell: f64, extent: f64 },
    #[error("point ({lat}, {lon}) is outside the domain")]
    OutsideDomain { lat: f64, lon: f64 },
    #[error("observation {id} is outside the domain")]
    ObservationOutsideDomain { id: u64 },
    #[error("non-finite covariate in training data")]
    NonFiniteCovariate,
    #[error("covariate length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("duplicate observation id {0}")]
    DuplicateObservationId(u64),
    #[error("observation species {found} does not match {expected}")]
    MixedSpecies { expected: String, found: String },
    #[error("stixel {0} is not part of the grid set")]
    UnknownStixel(String),
    #[error("malformed stixel id {0:?}")]
    BadStixelId(String),
    #[error("cannot decode ensemble: {0}")]
    Decode(String),
}
