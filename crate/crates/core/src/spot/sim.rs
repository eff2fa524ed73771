//! Run a plan on a spot fleet driven by a price trace.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::billing::{
    bill_instance, BidPolicy, BillingRecord, EndReason, FleetSpec, InstanceKind, InstanceLifecycle, LifecycleSegment,
};
use super::trace::{availability_intervals, PriceTrace};
use super::SpotError;
use crate::domain::Observation;
use crate::exec::{
    run_pipeline, CheckpointStore, EventKind, ExecError, Plan, RunOptions, RunRecord, Schedule, SegmentEnd, Window,
    WorkerSpec,
};
use crate::model::{FittedEnsemble, Learner};
use crate::seed;

pub const EVENT_LOG_HEADER: [&str; 4] = ["t_seconds", "event", "instance_id", "detail"];

const BOOT_STREAM: u64 = 0x626f_6f74;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t: f64,
    pub event: String,
    pub instance_id: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub ensemble: FittedEnsemble,
    pub record: RunRecord,
    pub lifecycles: Vec<InstanceLifecycle>,
    pub billing: Vec<BillingRecord>,
    pub events: Vec<LogEvent>,
    pub schedule: Schedule,
}

impl ClusterRun {
    pub fn total_cost(&self) -> f64 {
        self.billing.iter().map(BillingRecord::total).sum()
    }

    pub fn spot_cost(&self) -> f64 {
        self.billing.iter().filter(|b| b.kind == InstanceKind::Spot).map(BillingRecord::total).sum()
    }
}

pub fn spot_instance_id(worker: usize) -> String {
    format!("spot-{worker}")
}

pub fn dedicated_instance_id(i: usize) -> String {
    format!("dedicated-{i}")
}

/// Availability windows for every spot worker. Each launch draws its boot
/// delay uniformly from `[0, boot_delay_max]`, seeded by worker and window.
pub fn spot_workers(trace: &PriceTrace, bid: BidPolicy, fleet: &FleetSpec, seed: u64) -> Vec<WorkerSpec> {
    let intervals = availability_intervals(trace, bid.bid);
    (0..fleet.n_spot_workers)
        .map(|w| {
            let windows = intervals
                .iter()
                .enumerate()
                .map(|(i, &(launch, end))| {
                    let boot = if fleet.boot_delay_max > 0.0 {
                        let mut rng = seed::rng(seed::derive_seed_path(seed, &[BOOT_STREAM, w as u64, i as u64]));
                        rng.random_range(0.0..=fleet.boot_delay_max)
                    } else {
                        0.0
                    };
                    Window { launch, ready: launch + boot, end }
                })
                .collect();
            WorkerSpec { id: w, slots: fleet.cores as usize, windows }
        })
        .collect()
}

fn lifecycles(schedule: &Schedule, fleet: &FleetSpec) -> Vec<InstanceLifecycle> {
    let mut out: Vec<InstanceLifecycle> = (0..fleet.n_spot_workers)
        .map(|w| InstanceLifecycle { instance_id: spot_instance_id(w), kind: InstanceKind::Spot, segments: Vec::new() })
        .collect();
    for s in &schedule.segments {
        let reason = match s.reason {
            SegmentEnd::Preempted => EndReason::MarketPreemption,
            _ => EndReason::WorkloadComplete,
        };
        out[s.worker].segments.push(LifecycleSegment { launch: s.launch, end: s.end, reason });
    }
    for life in &mut out {
        life.segments.sort_by(|a, b| a.launch.total_cmp(&b.launch));
    }
    for i in 0..fleet.n_dedicated {
        out.push(InstanceLifecycle {
            instance_id: dedicated_instance_id(i),
            kind: InstanceKind::Dedicated,
            segments: vec![LifecycleSegment { launch: 0.0, end: schedule.end_time, reason: EndReason::WorkloadComplete }],
        });
    }
    out
}

fn event_log(schedule: &Schedule, plan: &Plan, trace: &PriceTrace, fleet: &FleetSpec) -> Vec<LogEvent> {
    let mut events = Vec::with_capacity(schedule.events.len() + trace.points.len() + 2 * fleet.n_dedicated);
    for p in trace.points.iter().take_while(|p| p.t <= schedule.end_time) {
        events.push(LogEvent { t: p.t, event: "price_change".into(), instance_id: "market".into(), detail: p.price.to_string() });
    }
    for i in 0..fleet.n_dedicated {
        events.push(LogEvent { t: 0.0, event: EventKind::Launch.as_str().into(), instance_id: dedicated_instance_id(i), detail: "dedicated".into() });
    }
    for e in &schedule.events {
        let instance_id = e.worker.map(spot_instance_id).unwrap_or_default();
        let detail = match (e.kind, e.task) {
            (_, Some(t)) => plan.tasks[t].id.to_string(),
            (EventKind::Preempted, None) => format!("market={}", trace.price_at(e.t)),
            _ => String::new(),
        };
        events.push(LogEvent { t: e.t, event: e.kind.as_str().into(), instance_id, detail });
    }
    for i in 0..fleet.n_dedicated {
        events.push(LogEvent {
            t: schedule.end_time,
            event: EventKind::Released.as_str().into(),
            instance_id: dedicated_instance_id(i),
            detail: "dedicated".into(),
        });
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}

/// Run `plan` on `fleet` under `trace` and `bid`, then bill every instance.
///
/// Spot workers hold the market's availability intervals, relaunch at the
/// start of the next interval after a preemption, and are let go when idle.
/// Dedicated coordinators run no tasks but are billed from 0 to the makespan.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cluster(
    trace: &PriceTrace,
    bid: BidPolicy,
    fleet: &FleetSpec,
    plan: &Plan,
    obs: &[Observation],
    learner: &dyn Learner,
    store: &CheckpointStore,
    seed: u64,
    threads: usize,
) -> Result<ClusterRun, SpotError> {
    fleet.validate()?;
    let workers = spot_workers(trace, bid, fleet, seed);
    let opts = RunOptions { threads, halt_at: None, release_idle: true };
    let out = match run_pipeline(plan, obs, learner, &workers, store, opts) {
        Ok(out) => out,
        Err(ExecError::Unschedulable { completed, total }) => return Err(SpotError::Timeout { completed, total }),
        Err(e) => return Err(e.into()),
    };
    let lifecycles = lifecycles(&out.schedule, fleet);
    let billing = lifecycles.iter().map(|l| bill_instance(l, trace, bid, fleet)).collect::<Result<Vec<_>, _>>()?;
    let events = event_log(&out.schedule, plan, trace, fleet);
    Ok(ClusterRun { ensemble: out.ensemble, record: out.record, lifecycles, billing, events, schedule: out.schedule })
}

pub fn write_event_log<W: Write>(events: &[LogEvent], out: W) -> Result<(), SpotError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_LOG_HEADER)?;
    for e in events {
        w.write_record([e.t.to_string(), e.event.clone(), e.instance_id.clone(), e.detail.clone()])?;
    }
    w.flush().map_err(|e| SpotError::Io { path: None, source: e })?;
    Ok(())
}
