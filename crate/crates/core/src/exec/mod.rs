//! Fault-tolerant execution of a species' stixel tasks.
//!
//! A [`Plan`] lists one task per non-empty stixel. The engine dispatches the
//! tasks over a fleet of workers in simulated time, retries anything lost to a
//! preemption, and commits each finished result exactly once to a
//! [`CheckpointStore`]. Dispatch is at-least-once; commit is exactly-once, and
//! the assembled ensemble depends only on the committed results.

pub mod engine;
pub mod plan;
pub mod scheduler;
pub mod store;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;

pub use engine::{estimate_core_hours, run_pipeline, FailureSchedule, LocalFleet, Outage, RunOptions, RunOutput, RunRecord};
pub use plan::{plan_tasks, DurationModel, Plan, TaskId, TaskSpec};
pub use scheduler::{simulate, Attempt, EventKind, SchedEvent, Schedule, Segment, SegmentEnd, Termination, Window, WorkerSpec};
pub use store::{CheckpointStore, ManifestEntry, PutOutcome, TaskResult};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid execution configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint store error at {}: {source}", path.display())]
    Store { path: PathBuf, source: io::Error },
    #[error("corrupt checkpoint {}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("conflicting result already committed for task {0}")]
    StoreConflict(String),
    #[error("stored result for task {0} was computed from a different task spec")]
    StaleCheckpoint(String),
    #[error("no worker availability left: {completed} of {total} tasks completed")]
    Unschedulable { completed: usize, total: usize },
    #[error("run interrupted: {completed} of {total} tasks completed")]
    Interrupted { completed: usize, total: usize },
}

impl ExecError {
    pub fn store(path: &Path, source: io::Error) -> Self {
        ExecError::Store { path: path.to_path_buf(), source }
    }
}
