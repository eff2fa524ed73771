//! Run a plan: simulate dispatch, train what completed, commit, assemble.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::plan::Plan;
use super::scheduler::{simulate, Schedule, Termination, Window, WorkerSpec};
use super::store::{CheckpointStore, TaskResult};
use super::ExecError;
use crate::domain::{Observation, SpeciesId};
use crate::model::{index_observations, train_stixel, FittedEnsemble, Learner, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// OS threads used to compute completed tasks.
    pub threads: usize,
    /// Stop the run at this simulated time.
    pub halt_at: Option<f64>,
    /// Let idle workers go while nothing is queued.
    pub release_idle: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        Self { threads, halt_at: None, release_idle: false }
    }
}

/// Accounting for one species. CPU and attempt totals are cumulative over
/// every run that has touched the checkpoint store; wall clock and
/// preemptions describe the latest run only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub species: SpeciesId,
    pub cpu_seconds: f64,
    /// CPU seconds of the attempts that produced committed results.
    pub useful_cpu_seconds: f64,
    pub wall_clock_hours: f64,
    pub n_tasks: usize,
    pub n_attempts: u64,
    pub n_preemptions: usize,
    /// Tasks whose results were already in the store when the run started.
    pub n_reused: usize,
}

pub fn estimate_core_hours(record: &RunRecord) -> f64 {
    record.cpu_seconds / 3600.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub ensemble: FittedEnsemble,
    pub record: RunRecord,
    pub schedule: Schedule,
}

/// Identical always-on workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalFleet {
    pub workers: usize,
    pub slots_per_worker: usize,
}

impl LocalFleet {
    pub fn new(workers: usize, slots_per_worker: usize) -> Self {
        Self { workers, slots_per_worker }
    }

    pub fn specs(&self) -> Vec<WorkerSpec> {
        (0..self.workers).map(|id| WorkerSpec::always_on(id, self.slots_per_worker)).collect()
    }
}

/// Worker `worker` is unavailable during `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    pub worker: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FailureSchedule {
    pub outages: Vec<Outage>,
    pub halt_at: Option<f64>,
}

impl FailureSchedule {
    /// Kill every worker once: worker `i` goes down at `first + i * stagger`
    /// for `downtime` seconds.
    pub fn kill_each_worker_once(n_workers: usize, first: f64, stagger: f64, downtime: f64) -> Self {
        let outages = (0..n_workers)
            .map(|worker| {
                let start = first + worker as f64 * stagger;
                Outage { worker, start, end: start + downtime }
            })
            .collect();
        Self { outages, halt_at: None }
    }

    /// Cut this schedule's outages out of the workers' availability windows.
    pub fn apply(&self, workers: &[WorkerSpec]) -> Vec<WorkerSpec> {
        workers
            .iter()
            .map(|w| {
                let mut outages: Vec<&Outage> = self.outages.iter().filter(|o| o.worker == w.id).collect();
                outages.sort_by(|a, b| a.start.total_cmp(&b.start));
                let mut windows = Vec::new();
                for win in &w.windows {
                    let boot = win.ready - win.launch;
                    let mut launch = win.launch;
                    for o in &outages {
                        if o.end <= launch || o.start >= win.end {
                            continue;
                        }
                        if o.start > launch {
                            windows.push(Window { launch, ready: (launch + boot).min(o.start), end: o.start });
                        }
                        launch = launch.max(o.end);
                    }
                    if launch < win.end {
                        windows.push(Window { launch, ready: launch + boot, end: win.end });
                    }
                }
                WorkerSpec { id: w.id, slots: w.slots, windows }
            })
            .collect()
    }
}

/// Train each `(task index, cpu seconds)` job, spread over `threads` threads.
fn train_completed(
    plan: &Plan,
    index: &HashMap<u64, &Observation>,
    learner: &dyn Learner,
    jobs: &[(usize, f64)],
    threads: usize,
) -> Result<Vec<TaskResult>, ExecError> {
    let next = AtomicUsize::new(0);
    let run_one = |&(t, cpu): &(usize, f64)| -> Result<TaskResult, ExecError> {
        let task = &plan.tasks[t];
        let subset: Vec<&Observation> = task.input.iter().map(|id| index[id]).collect();
        let outcome = train_stixel(task.id.stixel, &subset, learner, plan.min_train, task.seed)?;
        Ok(TaskResult { task: task.id.clone(), outcome, cpu_seconds: cpu, spec_digest: task.digest(plan.min_train) })
    };
    let mut slots: Vec<Option<Result<TaskResult, ExecError>>> = (0..jobs.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads.max(1).min(jobs.len().max(1)))
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        done.push((i, run_one(job)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("training thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every job was run")).collect()
}

/// Execute `plan` on `workers`, reusing and extending the results in `store`.
///
/// On a halt or when the fleet runs out of availability, everything that did
/// complete is still committed before the error is returned, so a later call
/// resumes where this one stopped.
pub fn run_pipeline(
    plan: &Plan,
    obs: &[Observation],
    learner: &dyn Learner,
    workers: &[WorkerSpec],
    store: &CheckpointStore,
    opts: RunOptions,
) -> Result<RunOutput, ExecError> {
    let index = index_observations(&plan.species, obs)?;
    let total = plan.tasks.len();

    let mut committed: Vec<Option<TaskResult>> = Vec::with_capacity(total);
    for task in &plan.tasks {
        let stored = store.get(&task.id)?;
        if let Some(r) = &stored {
            if r.spec_digest != task.digest(plan.min_train) {
                return Err(ExecError::StaleCheckpoint(task.id.to_string()));
            }
        }
        committed.push(stored);
    }
    let n_reused = committed.iter().filter(|r| r.is_some()).count();
    let pending: Vec<usize> = (0..total).filter(|&t| committed[t].is_none()).collect();
    let durations: Vec<f64> = plan.tasks.iter().map(|t| t.estimated_duration).collect();

    let schedule = simulate(&durations, &pending, workers, opts.release_idle, opts.halt_at);

    let jobs: Vec<(usize, f64)> = schedule
        .completions
        .iter()
        .map(|&a| (schedule.attempts[a].task, schedule.attempts[a].cpu_seconds))
        .collect();
    let results = train_completed(plan, &index, learner, &jobs, opts.threads)?;
    for (&(t, _), result) in jobs.iter().zip(results) {
        store.put(&result)?;
        committed[t] = Some(result);
    }

    let mut manifest = store.read_manifest()?;
    for attempt in &schedule.attempts {
        let entry = manifest.entry(plan.tasks[attempt.task].id.to_string()).or_default();
        entry.attempts += 1;
        entry.cpu_seconds += attempt.cpu_seconds;
    }
    store.write_manifest(&manifest)?;

    let completed = committed.iter().filter(|r| r.is_some()).count();
    match schedule.termination {
        Termination::Finished => {}
        Termination::Halted => return Err(ExecError::Interrupted { completed, total }),
        Termination::Stuck => return Err(ExecError::Unschedulable { completed, total }),
    }

    let mut ensemble = FittedEnsemble::new(plan.species.clone(), plan.grids.clone());
    let mut useful = 0.0;
    for result in committed.into_iter().flatten() {
        useful += result.cpu_seconds;
        if let TrainOutcome::Model(m) = result.outcome {
            ensemble.insert(m)?;
        }
    }
    let (cpu_seconds, n_attempts) = plan_totals(plan, &manifest);
    let record = RunRecord {
        species: plan.species.clone(),
        cpu_seconds,
        useful_cpu_seconds: useful,
        wall_clock_hours: schedule.end_time / 3600.0,
        n_tasks: total,
        n_attempts,
        n_preemptions: schedule.n_preemptions(),
        n_reused,
    };
    Ok(RunOutput { ensemble, record, schedule })
}

fn plan_totals(plan: &Plan, manifest: &BTreeMap<String, super::ManifestEntry>) -> (f64, u64) {
    plan.tasks
        .iter()
        .filter_map(|t| manifest.get(&t.id.to_string()))
        .fold((0.0, 0), |(cpu, n), e| (cpu + e.cpu_seconds, n + u64::from(e.attempts)))
}
