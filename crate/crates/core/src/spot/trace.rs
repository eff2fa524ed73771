//! Spot price traces: piecewise-constant USD/instance-hour over simulated seconds.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SpotError;
use crate::seed;

pub const TRACE_HEADER: [&str; 2] = ["t_seconds", "price"];

const BASE_STREAM: u64 = 0x6261_7365;
const SPIKE_STREAM: u64 = 0x7370_696b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub t: f64,
    pub price: f64,
}

/// Each price holds from its point until the next one. A trace without a
/// horizon holds its last price forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTrace {
    pub instance_type: String,
    pub cores: u32,
    pub points: Vec<PricePoint>,
    pub horizon: Option<f64>,
}

impl PriceTrace {
    pub fn new(instance_type: impl Into<String>, cores: u32, points: Vec<PricePoint>, horizon: Option<f64>) -> Result<Self, SpotError> {
        let first = points.first().ok_or(SpotError::EmptyTrace)?;
        if first.t != 0.0 {
            return Err(SpotError::InvalidTrace(format!("first point must be at t=0, found t={}", first.t)));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.price > 0.0) || !p.price.is_finite() {
                return Err(SpotError::InvalidTrace(format!("point {i}: non-positive price {}", p.price)));
            }
            if i > 0 && !(p.t > points[i - 1].t) {
                return Err(SpotError::InvalidTrace(format!("point {i}: time {} not after {}", p.t, points[i - 1].t)));
            }
        }
        if let Some(h) = horizon {
            let last = points[points.len() - 1].t;
            if !(h > last) {
                return Err(SpotError::InvalidTrace(format!("horizon {h} must lie after the last point {last}")));
            }
        }
        Ok(Self { instance_type: instance_type.into(), cores, points, horizon })
    }

    /// Market price at `t` (clamped to the first point for `t < 0`).
    pub fn price_at(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|p| p.t <= t);
        self.points[i.saturating_sub(1)].price
    }

    pub fn end(&self) -> f64 {
        self.horizon.unwrap_or(f64::INFINITY)
    }

    pub fn min_price(&self) -> f64 {
        self.points.iter().map(|p| p.price).fold(f64::INFINITY, f64::min)
    }

    /// Time-weighted average price over `[0, horizon)`; needs a horizon.
    pub fn time_average(&self) -> Option<f64> {
        let h = self.horizon?;
        let mut acc = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let next = self.points.get(i + 1).map_or(h, |q| q.t);
            acc += p.price * (next - p.t);
        }
        Some(acc / h)
    }

    /// Fraction of `[0, horizon)` during which the price exceeds `level`.
    pub fn fraction_above(&self, level: f64) -> Option<f64> {
        let h = self.horizon?;
        let mut above = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            if p.price > level {
                above += self.points.get(i + 1).map_or(h, |q| q.t) - p.t;
            }
        }
        Some(above / h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Long-run mean price, USD/instance-hour.
    pub mean: f64,
    /// Volatility of the log price, per square-root hour.
    pub volatility: f64,
    /// Mean-reversion rate of the log price, per hour.
    pub reversion: f64,
    /// Expected spikes per simulated day.
    pub spike_rate: f64,
    pub spike_multiplier: f64,
    pub spike_mean_hours: f64,
    /// Sampling step, seconds.
    pub step_seconds: f64,
    /// Trace length, seconds.
    pub horizon: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self {
            mean: 0.13,
            volatility: 0.1,
            reversion: 0.5,
            spike_rate: 0.5,
            spike_multiplier: 3.0,
            spike_mean_hours: 1.0,
            step_seconds: 300.0,
            horizon: 30.0 * 86_400.0,
        }
    }
}

impl TraceParams {
    fn validate(&self) -> Result<(), SpotError> {
        let bad = |what: &str| Err(SpotError::InvalidParams(what.to_string()));
        let finite = [
            self.mean,
            self.volatility,
            self.reversion,
            self.spike_rate,
            self.spike_multiplier,
            self.spike_mean_hours,
            self.step_seconds,
            self.horizon,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if !(self.mean > 0.0) {
            return bad("mean must be positive");
        }
        if !(self.horizon > 0.0) || !(self.step_seconds > 0.0) {
            return bad("horizon and step must be positive");
        }
        if self.volatility < 0.0 || self.spike_rate < 0.0 {
            return bad("volatility and spike rate must be non-negative");
        }
        if self.volatility > 0.0 && !(self.reversion > 0.0) {
            return bad("reversion must be positive when volatility is");
        }
        if self.spike_rate > 0.0 && (!(self.spike_multiplier > 0.0) || !(self.spike_mean_hours > 0.0)) {
            return bad("spike multiplier and duration must be positive");
        }
        Ok(())
    }
}

fn round_price(p: f64) -> f64 {
    ((p * 1e4).round() / 1e4).max(1e-4)
}

/// Mean-reverting log-price walk with Poisson spikes, sampled on a fixed
/// step. Points are emitted only where the rounded price changes.
pub fn gen_price_trace(seed: u64, params: TraceParams) -> Result<PriceTrace, SpotError> {
    params.validate()?;
    let mut base_rng = seed::rng(seed::derive_seed(seed, BASE_STREAM));
    let mut spike_rng = seed::rng(seed::derive_seed(seed, SPIKE_STREAM));

    let sigma = params.volatility;
    let theta = params.reversion;
    let mu = if sigma > 0.0 { params.mean.ln() - sigma * sigma / (4.0 * theta) } else { params.mean.ln() };
    let dt_h = params.step_seconds / 3600.0;
    let (decay, noise) = if sigma > 0.0 {
        let decay = (-theta * dt_h).exp();
        (decay, sigma * ((1.0 - decay * decay) / (2.0 * theta)).sqrt())
    } else {
        (1.0, 0.0)
    };

    let mut spikes: Vec<(f64, f64)> = Vec::new();
    if params.spike_rate > 0.0 {
        let gap = Exp::new(params.spike_rate / 86_400.0).expect("positive rate");
        let len = Exp::new(1.0 / (params.spike_mean_hours * 3600.0)).expect("positive duration");
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut spike_rng);
            if t >= params.horizon {
                break;
            }
            let d = len.sample(&mut spike_rng);
            spikes.push((t, t + d));
        }
    }

    let mut x = mu;
    let mut points: Vec<PricePoint> = Vec::new();
    let mut spike = 0;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * params.step_seconds;
        if t >= params.horizon {
            break;
        }
        if k > 0 && noise > 0.0 {
            let z: f64 = StandardNormal.sample(&mut base_rng);
            x = mu + (x - mu) * decay + noise * z;
        }
        while spike < spikes.len() && spikes[spike].1 <= t {
            spike += 1;
        }
        let spiking = spikes.get(spike).is_some_and(|&(s, e)| s <= t && t < e);
        let price = round_price(x.exp() * if spiking { params.spike_multiplier } else { 1.0 });
        if points.last().is_none_or(|p| p.price != price) {
            points.push(PricePoint { t, price });
        }
        k += 1;
    }
    PriceTrace::new("m4.4xlarge", 16, points, Some(params.horizon))
}

pub fn read_price_trace_from<R: Read>(input: R) -> Result<PriceTrace, SpotError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(SpotError::TraceHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut points: Vec<PricePoint> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = |message: String| SpotError::TraceRow { line, message };
        if rec.len() != 2 {
            return Err(row(format!("expected 2 fields, found {}", rec.len())));
        }
        let t: f64 = rec[0].trim().parse().map_err(|_| row(format!("bad t_seconds {:?}", &rec[0])))?;
        let price: f64 = rec[1].trim().parse().map_err(|_| row(format!("bad price {:?}", &rec[1])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(row(format!("bad t_seconds {t}")));
        }
        if !(price > 0.0) || !price.is_finite() {
            return Err(row(format!("non-positive price {price}")));
        }
        match points.last() {
            None if t != 0.0 => return Err(row(format!("first row must be at t=0, found {t}"))),
            Some(prev) if t <= prev.t => {
                return Err(row(format!("rows out of order: t={t} is not after t={}", prev.t)));
            }
            _ => {}
        }
        points.push(PricePoint { t, price });
    }
    if points.is_empty() {
        return Err(SpotError::EmptyTrace);
    }
    PriceTrace::new("m4.4xlarge", 16, points, None)
}

pub fn load_price_trace(path: &Path) -> Result<PriceTrace, SpotError> {
    let f = std::fs::File::open(path).map_err(|e| SpotError::io(path, e))?;
    read_price_trace_from(f)
}

pub fn write_price_trace<W: Write>(trace: &PriceTrace, out: W) -> Result<(), SpotError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for p in &trace.points {
        w.write_record([p.t.to_string(), p.price.to_string()])?;
    }
    w.flush().map_err(|e| SpotError::Io { path: None, source: e })?;
    Ok(())
}

/// Maximal `[start, end)` intervals during which the market price is at or
/// below `bid`. The last interval ends at the trace horizon, or at infinity.
pub fn availability_intervals(trace: &PriceTrace, bid: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for p in &trace.points {
        match (p.price <= bid, open) {
            (true, None) => open = Some(p.t),
            (false, Some(start)) => {
                out.push((start, p.t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        out.push((start, trace.end()));
    }
    out
}
