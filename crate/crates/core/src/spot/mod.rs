//! Spot-market simulation: price traces, bids, preemption and billing.

pub mod billing;
pub mod sim;
pub mod trace;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exec::ExecError;

pub use billing::{
    bill_instance, to_cents, write_billing, BidPolicy, BilledHour, BillingRecord, EndReason, FleetSpec, InstanceKind,
    InstanceLifecycle, LifecycleSegment,
};
pub use sim::{simulate_cluster, spot_workers, write_event_log, ClusterRun, LogEvent};
pub use trace::{
    availability_intervals, gen_price_trace, load_price_trace, read_price_trace_from, write_price_trace, PricePoint,
    PriceTrace, TraceParams,
};

#[derive(Debug, Error)]
pub enum SpotError {
    #[error("i/o error{}: {source}", path.as_ref().map(|p| format!(" at {}", p.display())).unwrap_or_default())]
    Io { path: Option<PathBuf>, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("price trace header must be t_seconds,price, found {0:?}")]
    TraceHeader(String),
    #[error("price trace line {line}: {message}")]
    TraceRow { line: u64, message: String },
    #[error("price trace is empty")]
    EmptyTrace,
    #[error("invalid price trace: {0}")]
    InvalidTrace(String),
    #[error("invalid trace parameters: {0}")]
    InvalidParams(String),
    #[error("invalid bid {0}: must be a positive number")]
    InvalidBid(f64),
    #[error("invalid fleet: {0}")]
    Fleet(String),
    #[error("instance {instance}: inconsistent lifecycle: {message}")]
    InconsistentLifecycle { instance: String, message: String },
    #[error("timeout: workload did not finish within the trace horizon ({completed} of {total} tasks, fraction {:.4})", completed_fraction(*.completed, *.total))]
    Timeout { completed: usize, total: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

fn completed_fraction(completed: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        completed as f64 / total as f64
    }
}

impl SpotError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        SpotError::Io { path: Some(path.to_path_buf()), source }
    }

    /// Completed fraction reported by a timeout.
    pub fn completed_fraction(&self) -> Option<f64> {
        match self {
            SpotError::Timeout { completed, total } => Some(completed_fraction(*completed, *total)),
            _ => None,
        }
    }
}
