use rand::Rng;
use stixelflow::domain::{DomainBox, Observation, SpeciesId};
use stixelflow::exec::{plan_tasks, CheckpointStore, DurationModel, Plan};
use stixelflow::model::{fit_species, LogisticGd, StixelConfig};
use stixelflow::seed;
use stixelflow::spot::{
    gen_price_trace, simulate_cluster, to_cents, write_event_log, BidPolicy, ClusterRun, EndReason, FleetSpec,
    InstanceKind, PricePoint, PriceTrace, SpotError, TraceParams,
};
use stixelflow::synth::{generate_world, sample_observations, WorldParams};

const HOUR: f64 = 3600.0;

fn species() -> SpeciesId {
    SpeciesId::new("wood_thrush").unwrap()
}

fn config() -> StixelConfig {
    StixelConfig { cell_width_deg: 25.0, cell_height_deg: 25.0, window_weeks: 13, layers: 3, min_train: 10, seed: 4 }
}

fn workload(n: usize, core_hours: f64) -> (Vec<Observation>, Plan) {
    let world = generate_world(8, DomainBox::desk_default(), 3, WorldParams::default()).unwrap();
    let obs = sample_observations(&world, n, 9, &species());
    let rough = plan_tasks(&species(), &obs, config(), DomainBox::desk_default(), DurationModel::default()).unwrap();
    let duration = DurationModel::calibrated(2.0, core_hours, rough.tasks.len(), rough.total_inputs()).unwrap();
    let plan = plan_tasks(&species(), &obs, config(), DomainBox::desk_default(), duration).unwrap();
    (obs, plan)
}

fn steps(points: &[(f64, f64)], horizon: Option<f64>) -> PriceTrace {
    PriceTrace::new("m4.4xlarge", 16, points.iter().map(|&(t, price)| PricePoint { t, price }).collect(), horizon).unwrap()
}

fn run(trace: &PriceTrace, bid: f64, fleet: &FleetSpec, obs: &[Observation], plan: &Plan, seed: u64) -> Result<ClusterRun, SpotError> {
    let dir = tempfile::tempdir().unwrap();
    let store = CheckpointStore::open(dir.path().join("store")).unwrap();
    simulate_cluster(trace, BidPolicy::new(bid).unwrap(), fleet, plan, obs, &LogisticGd::default(), &store, seed, 2)
}

#[test]
fn price_always_under_bid_means_no_preemptions() {
    let (obs, plan) = workload(1500, 120.0);
    let fleet = FleetSpec { n_spot_workers: 3, ..FleetSpec::default() };
    let out = run(&steps(&[(0.0, 0.13)], None), 0.20, &fleet, &obs, &plan, 1).unwrap();
    assert_eq!(out.record.n_preemptions, 0);
    let spot_hours: usize = out.billing.iter().filter(|b| b.kind == InstanceKind::Spot).map(|b| b.hours.len()).sum();
    assert!(spot_hours > 0);
    assert_eq!(to_cents(out.spot_cost()), to_cents(spot_hours as f64 * 0.13));
    // Same hours at on-demand prices: the spot bill is 16.25% of it.
    let ratio = out.spot_cost() / (spot_hours as f64 * 0.80);
    assert!((ratio - 0.1625).abs() < 1e-12, "{ratio}");
}

#[test]
fn two_hour_spike_preempts_every_worker_but_not_the_result() {
    let (obs, plan) = workload(1500, 120.0);
    let fleet = FleetSpec { n_spot_workers: 3, ..FleetSpec::default() };
    let calm = run(&steps(&[(0.0, 0.13)], None), 0.20, &fleet, &obs, &plan, 1).unwrap();
    assert!(calm.schedule.end_time > 1.5 * HOUR, "makespan {}", calm.schedule.end_time);

    let spike = steps(&[(0.0, 0.13), (HOUR, 0.60), (3.0 * HOUR, 0.13)], None);
    let out = run(&spike, 0.20, &fleet, &obs, &plan, 1).unwrap();
    assert_eq!(out.record.n_preemptions, fleet.n_spot_workers);
    assert_eq!(out.ensemble.to_json_bytes(), calm.ensemble.to_json_bytes());
    let serial = fit_species(&species(), &obs, config(), DomainBox::desk_default(), &LogisticGd::default()).unwrap();
    assert_eq!(out.ensemble.to_json_bytes(), serial.to_json_bytes());

    for life in out.lifecycles.iter().filter(|l| l.kind == InstanceKind::Spot) {
        for s in &life.segments {
            assert!(s.end <= HOUR || s.launch >= 3.0 * HOUR, "{} active during the spike: {s:?}", life.instance_id);
        }
        assert!(life.segments.iter().any(|s| s.reason == EndReason::MarketPreemption));
    }
    assert!(out.record.cpu_seconds > calm.record.cpu_seconds);
}

#[test]
fn bid_below_market_times_out_with_nothing_done() {
    let (obs, plan) = workload(600, 10.0);
    let trace = steps(&[(0.0, 0.13)], Some(30.0 * 86_400.0));
    let err = run(&trace, 0.05, &FleetSpec::default(), &obs, &plan, 1).unwrap_err();
    assert!(matches!(err, SpotError::Timeout { completed: 0, .. }), "{err}");
    assert_eq!(err.completed_fraction(), Some(0.0));
}

#[test]
fn short_horizon_times_out_with_partial_progress() {
    let (obs, plan) = workload(1500, 120.0);
    let trace = steps(&[(0.0, 0.13)], Some(HOUR));
    let err = run(&trace, 0.20, &FleetSpec { n_spot_workers: 2, ..FleetSpec::default() }, &obs, &plan, 1).unwrap_err();
    let f = err.completed_fraction().unwrap();
    assert!(f > 0.0 && f < 1.0, "{err}");
}

#[test]
fn same_inputs_same_bill_and_event_log() {
    let (obs, plan) = workload(1500, 120.0);
    let trace = gen_price_trace(77, TraceParams { spike_rate: 6.0, ..TraceParams::default() }).unwrap();
    let fleet = FleetSpec { n_spot_workers: 3, orchestration_fee: 0.24, ..FleetSpec::default() };
    let logs: Vec<(Vec<u8>, i64)> = (0..2)
        .map(|_| {
            let out = run(&trace, 0.20, &fleet, &obs, &plan, 5).unwrap();
            let mut buf = Vec::new();
            write_event_log(&out.events, &mut buf).unwrap();
            (buf, to_cents(out.total_cost()))
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
    assert!(logs[0].0.starts_with(b"t_seconds,event,instance_id,detail\n"));
}

#[test]
fn billed_spot_rate_never_exceeds_bid() {
    let (obs, plan) = workload(400, 30.0);
    let mut rng = seed::rng(2024);
    for case in 0..100u64 {
        let params = TraceParams {
            volatility: rng.random_range(0.05..0.6),
            spike_rate: rng.random_range(0.0..12.0),
            horizon: 20.0 * 86_400.0,
            ..TraceParams::default()
        };
        let trace = gen_price_trace(case, params).unwrap();
        let bid = rng.random_range(0.12..0.40);
        let fleet = FleetSpec { n_spot_workers: 2, orchestration_fee: 0.24, ..FleetSpec::default() };
        let out = match run(&trace, bid, &fleet, &obs, &plan, case) {
            Ok(out) => out,
            Err(SpotError::Timeout { .. }) => continue,
            Err(e) => panic!("case {case}: {e}"),
        };
        for b in out.billing.iter().filter(|b| b.kind == InstanceKind::Spot) {
            for h in &b.hours {
                assert!(h.market_rate <= bid, "case {case}: rate {} above bid {bid}", h.market_rate);
                assert_eq!(h.market_rate, trace.price_at(h.hour_start));
            }
        }
        for life in out.lifecycles.iter().filter(|l| l.kind == InstanceKind::Spot) {
            for s in &life.segments {
                let prices = std::iter::once(trace.price_at(s.launch))
                    .chain(trace.points.iter().filter(|p| p.t > s.launch && p.t < s.end).map(|p| p.price));
                assert!(prices.into_iter().all(|p| p <= bid), "case {case}: active above bid");
            }
        }
    }
}
