//! Simulated-time dispatcher.
//!
//! Workers are logical executors with a number of task slots and a list of
//! availability windows. Tasks are dispatched in queue order to the
//! lowest-numbered free slot; a task still running when its worker's window
//! closes is lost and goes back to the front of the queue. The whole
//! simulation is a single deterministic event loop over `f64` seconds.
//!
//! Events at the same instant are processed in a fixed order: completions,
//! window ends, launches, boot completions, dispatch, wake-ups, releases.

use std::collections::VecDeque;

/// One availability window `[launch, end)`. Tasks may start from `ready`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub launch: f64,
    pub ready: f64,
    pub end: f64,
}

impl Window {
    pub fn open(launch: f64, end: f64) -> Self {
        Self { launch, ready: launch, end }
    }

    fn boot(&self) -> f64 {
        self.ready - self.launch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerSpec {
    pub id: usize,
    pub slots: usize,
    pub windows: Vec<Window>,
}

impl WorkerSpec {
    pub fn always_on(id: usize, slots: usize) -> Self {
        Self { id, slots, windows: vec![Window::open(0.0, f64::INFINITY)] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentEnd {
    /// The availability window closed under the worker.
    Preempted,
    /// The worker went idle with nothing queued and was let go.
    Released,
    /// Still running when the last task finished.
    Completed,
    /// The run was stopped externally.
    Halted,
    /// The run could not make further progress.
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub worker: usize,
    pub launch: f64,
    pub end: f64,
    pub reason: SegmentEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    /// Index into the task list handed to [`simulate`].
    pub task: usize,
    pub worker: usize,
    pub start: f64,
    pub end: f64,
    pub completed: bool,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Launch,
    Ready,
    TaskStart,
    TaskComplete,
    TaskLost,
    Preempted,
    Released,
    Halted,
    WorkloadComplete,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Launch => "instance_launch",
            EventKind::Ready => "instance_ready",
            EventKind::TaskStart => "task_start",
            EventKind::TaskComplete => "task_complete",
            EventKind::TaskLost => "task_lost",
            EventKind::Preempted => "instance_preempted",
            EventKind::Released => "instance_released",
            EventKind::Halted => "run_halted",
            EventKind::WorkloadComplete => "workload_complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedEvent {
    pub t: f64,
    pub kind: EventKind,
    pub worker: Option<usize>,
    pub task: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Finished,
    Halted,
    Stuck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub attempts: Vec<Attempt>,
    pub segments: Vec<Segment>,
    pub events: Vec<SchedEvent>,
    /// Attempt indices in completion order.
    pub completions: Vec<usize>,
    pub end_time: f64,
    pub termination: Termination,
}

impl Schedule {
    pub fn n_preemptions(&self) -> usize {
        self.segments.iter().filter(|s| s.reason == SegmentEnd::Preempted).count()
    }

    pub fn cpu_seconds(&self) -> f64 {
        self.attempts.iter().map(|a| a.cpu_seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Waiting(usize),
    Booting { window: usize, ready_at: f64 },
    Up(usize),
    Dormant(usize),
    Exhausted,
}

struct WorkerState<'a> {
    spec: &'a WorkerSpec,
    phase: Phase,
    seg_launch: Option<f64>,
    slots: Vec<Option<usize>>,
}

impl WorkerState<'_> {
    fn window(&self) -> Option<(usize, Window)> {
        match self.phase {
            Phase::Booting { window, .. } | Phase::Up(window) | Phase::Dormant(window) => {
                Some((window, self.spec.windows[window]))
            }
            Phase::Waiting(_) | Phase::Exhausted => None,
        }
    }

    fn next_boundary(&self) -> Option<f64> {
        match self.phase {
            Phase::Waiting(i) => Some(self.spec.windows[i].launch),
            Phase::Booting { window, ready_at } => Some(ready_at.min(self.spec.windows[window].end)),
            Phase::Up(w) | Phase::Dormant(w) => Some(self.spec.windows[w].end).filter(|e| e.is_finite()),
            Phase::Exhausted => None,
        }
    }

    fn after_window(&self, w: usize) -> Phase {
        if w + 1 < self.spec.windows.len() {
            Phase::Waiting(w + 1)
        } else {
            Phase::Exhausted
        }
    }

    fn is_idle(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }
}

struct Sim<'a> {
    durations: &'a [f64],
    workers: Vec<WorkerState<'a>>,
    queue: VecDeque<usize>,
    running: usize,
    out: Schedule,
}

impl Sim<'_> {
    fn log(&mut self, t: f64, kind: EventKind, worker: Option<usize>, task: Option<usize>) {
        self.out.events.push(SchedEvent { t, kind, worker, task });
    }

    fn end_segment(&mut self, w: usize, t: f64, reason: SegmentEnd) {
        if let Some(launch) = self.workers[w].seg_launch.take() {
            let worker = self.workers[w].spec.id;
            self.out.segments.push(Segment { worker, launch, end: t, reason });
        }
    }

    /// Stop every running attempt on worker `w` at `t`, returning the lost task indices.
    fn kill_running(&mut self, w: usize, t: f64) -> Vec<usize> {
        let mut lost = Vec::new();
        for slot in 0..self.workers[w].slots.len() {
            if let Some(a) = self.workers[w].slots[slot].take() {
                let attempt = &mut self.out.attempts[a];
                attempt.end = t;
                attempt.cpu_seconds = t - attempt.start;
                let (task, worker) = (attempt.task, attempt.worker);
                self.running -= 1;
                lost.push(task);
                self.log(t, EventKind::TaskLost, Some(worker), Some(task));
            }
        }
        lost
    }

    fn launch(&mut self, w: usize, window: usize, t: f64, ready_at: f64) {
        self.workers[w].seg_launch = Some(t);
        let id = self.workers[w].spec.id;
        self.log(t, EventKind::Launch, Some(id), None);
        if ready_at <= t {
            self.workers[w].phase = Phase::Up(window);
            self.log(t, EventKind::Ready, Some(id), None);
        } else {
            self.workers[w].phase = Phase::Booting { window, ready_at };
        }
    }

    fn dispatch(&mut self, t: f64) {
        for w in 0..self.workers.len() {
            if !matches!(self.workers[w].phase, Phase::Up(_)) {
                continue;
            }
            for slot in 0..self.workers[w].slots.len() {
                if self.workers[w].slots[slot].is_some() {
                    continue;
                }
                let Some(task) = self.queue.pop_front() else { return };
                let worker = self.workers[w].spec.id;
                let a = self.out.attempts.len();
                self.out.attempts.push(Attempt {
                    task,
                    worker,
                    start: t,
                    end: t + self.durations[task],
                    completed: false,
                    cpu_seconds: 0.0,
                });
                self.workers[w].slots[slot] = Some(a);
                self.running += 1;
                self.log(t, EventKind::TaskStart, Some(worker), Some(task));
            }
        }
    }

    fn next_event_time(&self, halt_at: Option<f64>) -> Option<f64> {
        let finishes = self
            .workers
            .iter()
            .flat_map(|w| w.slots.iter().flatten())
            .map(|&a| self.out.attempts[a].end);
        let boundaries = self.workers.iter().filter_map(WorkerState::next_boundary);
        finishes.chain(boundaries).chain(halt_at).min_by(f64::total_cmp)
    }
}

/// Run the dispatcher over `pending` (indices into `durations`, in priority order).
pub fn simulate(
    durations: &[f64],
    pending: &[usize],
    workers: &[WorkerSpec],
    release_idle: bool,
    halt_at: Option<f64>,
) -> Schedule {
    let mut sim = Sim {
        durations,
        workers: workers
            .iter()
            .map(|spec| WorkerState {
                spec,
                phase: if spec.windows.is_empty() { Phase::Exhausted } else { Phase::Waiting(0) },
                seg_launch: None,
                slots: vec![None; spec.slots],
            })
            .collect(),
        queue: pending.iter().copied().collect(),
        running: 0,
        out: Schedule {
            attempts: Vec::new(),
            segments: Vec::new(),
            events: Vec::new(),
            completions: Vec::new(),
            end_time: 0.0,
            termination: Termination::Finished,
        },
    };
    let n = sim.workers.len();
    let mut t = 0.0f64;
    loop {
        if sim.queue.is_empty() && sim.running == 0 {
            for w in 0..n {
                sim.end_segment(w, t, SegmentEnd::Completed);
            }
            sim.log(t, EventKind::WorkloadComplete, None, None);
            sim.out.termination = Termination::Finished;
            break;
        }
        let Some(next) = sim.next_event_time(halt_at) else {
            for w in 0..n {
                sim.end_segment(w, t, SegmentEnd::Abandoned);
            }
            sim.out.termination = Termination::Stuck;
            break;
        };
        t = next.max(t);
        if let Some(h) = halt_at.filter(|&h| t >= h) {
            t = h;
            for w in 0..n {
                sim.kill_running(w, t);
                sim.end_segment(w, t, SegmentEnd::Halted);
            }
            sim.log(t, EventKind::Halted, None, None);
            sim.out.termination = Termination::Halted;
            break;
        }

        for w in 0..n {
            for slot in 0..sim.workers[w].slots.len() {
                let Some(a) = sim.workers[w].slots[slot] else { continue };
                if sim.out.attempts[a].end <= t {
                    sim.workers[w].slots[slot] = None;
                    let attempt = &mut sim.out.attempts[a];
                    attempt.completed = true;
                    attempt.cpu_seconds = durations[attempt.task];
                    let (task, worker) = (attempt.task, attempt.worker);
                    sim.running -= 1;
                    sim.out.completions.push(a);
                    sim.log(t, EventKind::TaskComplete, Some(worker), Some(task));
                }
            }
        }

        let mut lost = Vec::new();
        for w in 0..n {
            let Some((index, window)) = sim.workers[w].window() else { continue };
            if window.end <= t {
                lost.extend(sim.kill_running(w, t));
                if sim.workers[w].seg_launch.is_some() {
                    let id = sim.workers[w].spec.id;
                    sim.log(t, EventKind::Preempted, Some(id), None);
                }
                sim.end_segment(w, t, SegmentEnd::Preempted);
                sim.workers[w].phase = sim.workers[w].after_window(index);
            }
        }
        lost.sort_unstable();
        for task in lost.into_iter().rev() {
            sim.queue.push_front(task);
        }

        for w in 0..n {
            while let Phase::Waiting(i) = sim.workers[w].phase {
                let window = sim.workers[w].spec.windows[i];
                if window.launch > t {
                    break;
                }
                if window.end <= t {
                    sim.workers[w].phase = sim.workers[w].after_window(i);
                    continue;
                }
                if release_idle && sim.queue.is_empty() {
                    sim.workers[w].phase = Phase::Dormant(i);
                } else {
                    sim.launch(w, i, t, window.ready);
                }
            }
        }

        for w in 0..n {
            if let Phase::Booting { window, ready_at } = sim.workers[w].phase {
                if ready_at <= t {
                    sim.workers[w].phase = Phase::Up(window);
                    let id = sim.workers[w].spec.id;
                    sim.log(t, EventKind::Ready, Some(id), None);
                }
            }
        }

        sim.dispatch(t);

        if !sim.queue.is_empty() {
            let mut woke = false;
            for w in 0..n {
                if sim.queue.is_empty() {
                    break;
                }
                if let Phase::Dormant(i) = sim.workers[w].phase {
                    let boot = sim.workers[w].spec.windows[i].boot();
                    sim.launch(w, i, t, t + boot);
                    woke = true;
                }
            }
            if woke {
                sim.dispatch(t);
            }
        }

        if release_idle && sim.queue.is_empty() {
            for w in 0..n {
                let releasable = matches!(sim.workers[w].phase, Phase::Up(_) | Phase::Booting { .. });
                if releasable && sim.workers[w].is_idle() {
                    let (index, _) = sim.workers[w].window().expect("active worker has a window");
                    let id = sim.workers[w].spec.id;
                    sim.log(t, EventKind::Released, Some(id), None);
                    sim.end_segment(w, t, SegmentEnd::Released);
                    sim.workers[w].phase = Phase::Dormant(index);
                }
            }
        }
    }
    sim.out.end_time = t;
    sim.out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_worker_runs_tasks_back_to_back() {
        let s = simulate(&[10.0, 5.0, 1.0], &[0, 1, 2], &[WorkerSpec::always_on(0, 1)], false, None);
        assert_eq!(s.termination, Termination::Finished);
        assert_eq!(s.end_time, 16.0);
        assert_eq!(s.attempts.len(), 3);
        assert_eq!(s.cpu_seconds(), 16.0);
        assert_eq!(s.segments, vec![Segment { worker: 0, launch: 0.0, end: 16.0, reason: SegmentEnd::Completed }]);
    }

    #[test]
    fn slots_run_in_parallel() {
        let s = simulate(&[10.0; 4], &[0, 1, 2, 3], &[WorkerSpec::always_on(0, 2), WorkerSpec::always_on(1, 2)], false, None);
        assert_eq!(s.end_time, 10.0);
        assert_eq!(s.n_preemptions(), 0);
    }

    #[test]
    fn preempted_task_is_retried_and_waste_is_counted() {
        let w = WorkerSpec { id: 0, slots: 1, windows: vec![Window::open(0.0, 4.0), Window::open(6.0, f64::INFINITY)] };
        let s = simulate(&[10.0], &[0], &[w], false, None);
        assert_eq!(s.termination, Termination::Finished);
        assert_eq!(s.attempts.len(), 2);
        assert!(!s.attempts[0].completed);
        assert_eq!(s.attempts[0].cpu_seconds, 4.0);
        assert_eq!(s.attempts[1].start, 6.0);
        assert_eq!(s.end_time, 16.0);
        assert_eq!(s.cpu_seconds(), 14.0);
        assert_eq!(s.n_preemptions(), 1);
    }

    #[test]
    fn completion_at_window_end_counts() {
        let w = WorkerSpec { id: 0, slots: 1, windows: vec![Window::open(0.0, 10.0)] };
        let s = simulate(&[10.0], &[0], &[w], false, None);
        assert_eq!(s.termination, Termination::Finished);
        assert_eq!(s.attempts.len(), 1);
        assert!(s.attempts[0].completed);
    }

    #[test]
    fn no_windows_left_is_stuck() {
        let w = WorkerSpec { id: 0, slots: 1, windows: vec![Window::open(0.0, 3.0)] };
        let s = simulate(&[10.0], &[0], &[w], false, None);
        assert_eq!(s.termination, Termination::Stuck);
        assert!(s.completions.is_empty());
        let s = simulate(&[1.0], &[0], &[], false, None);
        assert_eq!(s.termination, Termination::Stuck);
    }

    #[test]
    fn halt_stops_everything() {
        let s = simulate(&[5.0, 5.0, 5.0], &[0, 1, 2], &[WorkerSpec::always_on(0, 1)], false, Some(7.0));
        assert_eq!(s.termination, Termination::Halted);
        assert_eq!(s.completions.len(), 1);
        assert_eq!(s.attempts[1].cpu_seconds, 2.0);
        assert_eq!(s.segments[0].reason, SegmentEnd::Halted);
    }

    #[test]
    fn idle_workers_are_released_and_boot_delays_respected() {
        let w0 = WorkerSpec { id: 0, slots: 1, windows: vec![Window { launch: 0.0, ready: 1.0, end: f64::INFINITY }] };
        let w1 = WorkerSpec { id: 1, slots: 1, windows: vec![Window { launch: 0.0, ready: 2.0, end: f64::INFINITY }] };
        let s = simulate(&[3.0, 3.0, 3.0], &[0, 1, 2], &[w0, w1], true, None);
        assert_eq!(s.termination, Termination::Finished);
        // w0 runs tasks 0 [1,4) and 2 [4,7), w1 runs task 1 [2,5) and is released at 5.
        assert_eq!(s.end_time, 7.0);
        let mut segs = s.segments.clone();
        segs.sort_by_key(|s| s.worker);
        assert_eq!(segs[0], Segment { worker: 0, launch: 0.0, end: 7.0, reason: SegmentEnd::Released });
        assert_eq!(segs[1], Segment { worker: 1, launch: 0.0, end: 5.0, reason: SegmentEnd::Released });
    }

    #[test]
    fn empty_workload_finishes_immediately() {
        let s = simulate(&[], &[], &[WorkerSpec::always_on(0, 1)], false, None);
        assert_eq!(s.termination, Termination::Finished);
        assert_eq!(s.end_time, 0.0);
        assert!(s.segments.is_empty());
    }
}
