use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use anyhow::{bail, ensure, Context, Result};
use stixelflow::exec::{estimate_core_hours, plan_tasks, CheckpointStore, DurationModel};
use stixelflow::seed::derive_seed;
use stixelflow::spot::{
    gen_price_trace, load_price_trace, simulate_cluster, to_cents, write_billing, write_event_log, write_price_trace,
    BidPolicy, FleetSpec, PriceTrace, TraceParams,
};

use crate::fit::{load_observations, load_settings, resolve_species, write_file};
use crate::SimulateArgs;

const TRACE_STREAM: u64 = 0x7472_6163;
const BOOT_STREAM: u64 = 0x626f_6f74;

/// `k=v,k=v` with every key drawn from `allowed`.
fn parse_pairs(s: &str, allowed: &[&str]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((k, v)) = pair.split_once('=') else { bail!("expected key=value, got {pair:?}") };
        let k = k.trim();
        if !allowed.contains(&k) {
            bail!("unknown key {k:?}; expected one of {}", allowed.join(", "));
        }
        let v: f64 = v.trim().parse().with_context(|| format!("bad value for {k}: {v:?}"))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

fn count(map: &BTreeMap<String, f64>, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v <= 1e6 => Ok(v as usize),
        Some(v) => bail!("{key} must be a non-negative integer, got {v}"),
    }
}

pub fn parse_fleet(s: &str) -> Result<FleetSpec> {
    let m = parse_pairs(s, &["spot", "dedicated", "cores", "on_demand", "fee", "boot"])?;
    let d = FleetSpec::default();
    let fleet = FleetSpec {
        n_spot_workers: count(&m, "spot", d.n_spot_workers)?,
        n_dedicated: count(&m, "dedicated", d.n_dedicated)?,
        cores: u32::try_from(count(&m, "cores", d.cores as usize)?).context("cores out of range")?,
        on_demand_rate: m.get("on_demand").copied().unwrap_or(d.on_demand_rate),
        orchestration_fee: m.get("fee").copied().unwrap_or(d.orchestration_fee),
        boot_delay_max: m.get("boot").copied().unwrap_or(d.boot_delay_max),
    };
    fleet.validate()?;
    Ok(fleet)
}

pub fn parse_trace_params(s: &str) -> Result<TraceParams> {
    let keys = ["mean", "volatility", "reversion", "spike_rate", "spike_multiplier", "spike_mean_hours", "step_seconds", "horizon_days"];
    let m = parse_pairs(s, &keys)?;
    let d = TraceParams::default();
    let get = |k: &str, v: f64| m.get(k).copied().unwrap_or(v);
    Ok(TraceParams {
        mean: get("mean", d.mean),
        volatility: get("volatility", d.volatility),
        reversion: get("reversion", d.reversion),
        spike_rate: get("spike_rate", d.spike_rate),
        spike_multiplier: get("spike_multiplier", d.spike_multiplier),
        spike_mean_hours: get("spike_mean_hours", d.spike_mean_hours),
        step_seconds: get("step_seconds", d.step_seconds),
        horizon: get("horizon_days", d.horizon / 86_400.0) * 86_400.0,
    })
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    let bid = BidPolicy::new(args.bid)?;
    let fleet = parse_fleet(&args.fleet)?;
    let trace: PriceTrace = match (&args.trace, &args.trace_params) {
        (Some(path), _) => load_price_trace(path).with_context(|| format!("{}", path.display()))?,
        (None, params) => gen_price_trace(derive_seed(seed, TRACE_STREAM), parse_trace_params(params.as_deref().unwrap_or(""))?)?,
    };

    let settings = load_settings(args.config.as_deref(), seed)?;
    let obs = load_observations(&args.tasks_from, &settings.domain)?;
    let species = resolve_species(None, &obs)?;
    let mut duration = settings.duration;
    if let Some(core_hours) = args.core_hours {
        ensure!(core_hours > 0.0, "--core-hours must be positive");
        let rough = plan_tasks(&species, &obs, settings.stixel, settings.domain, DurationModel::default())?;
        duration = DurationModel::calibrated(duration.base_seconds, core_hours, rough.tasks.len(), rough.total_inputs())?;
    }
    let plan = plan_tasks(&species, &obs, settings.stixel, settings.domain, duration)?;

    // Always start from an empty store so reruns replay the same market.
    let store_dir = args.out.join("checkpoints");
    if store_dir.exists() {
        fs::remove_dir_all(&store_dir).with_context(|| format!("clearing {}", store_dir.display()))?;
    }
    let store = CheckpointStore::open(&store_dir)?;
    let run = simulate_cluster(&trace, bid, &fleet, &plan, &obs, &settings.learner, &store, derive_seed(seed, BOOT_STREAM), 4)?;

    let mut buf = Vec::new();
    write_price_trace(&trace, &mut buf)?;
    write_file(&args.out.join("trace.csv"), &buf)?;
    buf.clear();
    write_event_log(&run.events, &mut buf)?;
    write_file(&args.out.join("events.csv"), &buf)?;
    buf.clear();
    write_billing(&run.billing, &mut buf)?;
    write_file(&args.out.join("billing.csv"), &buf)?;
    write_file(&args.out.join("ensemble.json"), &run.ensemble.to_json_bytes())?;
    let mut record = serde_json::to_vec_pretty(&run.record)?;
    record.push(b'\n');
    write_file(&args.out.join("run_record.json"), &record)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "species: {}", run.record.species)?;
    writeln!(out, "n_tasks: {}", run.record.n_tasks)?;
    writeln!(out, "n_attempts: {}", run.record.n_attempts)?;
    writeln!(out, "n_preemptions: {}", run.record.n_preemptions)?;
    writeln!(out, "core_hours: {:.4}", estimate_core_hours(&run.record))?;
    writeln!(out, "wall_clock_hours: {:.4}", run.record.wall_clock_hours)?;
    writeln!(out, "spot_cost_usd: {}", stixelflow::cost::format_cents(to_cents(run.spot_cost())))?;
    writeln!(out, "total_cost_usd: {}", stixelflow::cost::format_cents(to_cents(run.total_cost())))?;
    Ok(())
}
