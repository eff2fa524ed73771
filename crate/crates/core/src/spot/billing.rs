//! Instance lifecycles and hour-granular billing.
//!
//! Spot hours are priced at the market rate in force at the start of each
//! hour, plus the orchestration fee. A partial hour cut short by the market
//! is free; a partial hour ended by the customer is billed in full.
//! Dedicated instances pay the on-demand rate plus the fee per started hour.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trace::PriceTrace;
use super::SpotError;

pub const BILLING_HEADER: [&str; 3] = ["instance_id", "hour_start", "rate"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    Spot,
    Dedicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    MarketPreemption,
    WorkloadComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifecycleSegment {
    pub launch: f64,
    pub end: f64,
    pub reason: EndReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceLifecycle {
    pub instance_id: String,
    pub kind: InstanceKind,
    pub segments: Vec<LifecycleSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidPolicy {
    pub bid: f64,
}

impl BidPolicy {
    pub fn new(bid: f64) -> Result<Self, SpotError> {
        if !(bid > 0.0) || !bid.is_finite() {
            return Err(SpotError::InvalidBid(bid));
        }
        Ok(Self { bid })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub n_spot_workers: usize,
    pub n_dedicated: usize,
    pub cores: u32,
    /// USD per instance-hour for dedicated instances.
    pub on_demand_rate: f64,
    /// USD per instance-hour on every instance; 0 when self-managed.
    pub orchestration_fee: f64,
    /// Upper bound of the seeded boot delay of each spot launch, seconds.
    pub boot_delay_max: f64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self { n_spot_workers: 4, n_dedicated: 1, cores: 16, on_demand_rate: 0.80, orchestration_fee: 0.0, boot_delay_max: 60.0 }
    }
}

impl FleetSpec {
    pub fn validate(&self) -> Result<(), SpotError> {
        let bad = |m: &str| Err(SpotError::Fleet(m.to_string()));
        if self.n_dedicated < 1 {
            return bad("at least one dedicated coordinator is required");
        }
        if self.cores < 1 {
            return bad("cores per instance must be at least 1");
        }
        for (name, v) in
            [("on_demand_rate", self.on_demand_rate), ("orchestration_fee", self.orchestration_fee), ("boot_delay_max", self.boot_delay_max)]
        {
            if !v.is_finite() || v < 0.0 {
                return Err(SpotError::Fleet(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilledHour {
    pub hour_start: f64,
    /// Market price (spot) or on-demand rate (dedicated) for the hour.
    pub market_rate: f64,
    pub fee: f64,
}

impl BilledHour {
    pub fn rate(&self) -> f64 {
        self.market_rate + self.fee
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillingRecord {
    pub instance_id: String,
    pub kind: InstanceKind,
    pub hours: Vec<BilledHour>,
}

impl BillingRecord {
    pub fn total(&self) -> f64 {
        self.hours.iter().map(BilledHour::rate).sum()
    }

    pub fn total_cents(&self) -> i64 {
        to_cents(self.total())
    }
}

pub fn to_cents(usd: f64) -> i64 {
    (usd * 100.0).round() as i64
}

const HOUR: f64 = 3600.0;

/// Whole hours in `[0, duration)` and whether a partial hour remains.
fn hour_split(duration: f64) -> (u64, bool) {
    // Tolerate float noise just below an hour boundary.
    let hours = duration / HOUR;
    let whole = (hours + 1e-9).floor();
    (whole as u64, duration - whole * HOUR > 1e-6)
}

fn check_segments(life: &InstanceLifecycle, trace: &PriceTrace, bid: BidPolicy) -> Result<(), SpotError> {
    let bad = |message: String| SpotError::InconsistentLifecycle { instance: life.instance_id.clone(), message };
    let mut prev_end = f64::NEG_INFINITY;
    for s in &life.segments {
        if !(s.end >= s.launch) || s.launch < prev_end || !s.launch.is_finite() || !s.end.is_finite() {
            return Err(bad(format!("segment [{}, {}) overlaps or is out of order", s.launch, s.end)));
        }
        prev_end = s.end;
        if life.kind == InstanceKind::Dedicated {
            continue;
        }
        if s.end > trace.end() {
            return Err(bad(format!("segment ends at {} after the trace horizon", s.end)));
        }
        let above = std::iter::once(trace.price_at(s.launch))
            .chain(trace.points.iter().filter(|p| p.t > s.launch && p.t < s.end).map(|p| p.price))
            .find(|&p| p > bid.bid);
        if let Some(p) = above {
            return Err(bad(format!("market price {p} exceeds bid {} during [{}, {})", bid.bid, s.launch, s.end)));
        }
        if s.reason == EndReason::MarketPreemption && s.end < trace.end() && trace.price_at(s.end) <= bid.bid {
            return Err(bad(format!("segment is marked preempted at {} but the market is still under the bid", s.end)));
        }
    }
    Ok(())
}

pub fn bill_instance(
    life: &InstanceLifecycle,
    trace: &PriceTrace,
    bid: BidPolicy,
    fleet: &FleetSpec,
) -> Result<BillingRecord, SpotError> {
    check_segments(life, trace, bid)?;
    let mut hours = Vec::new();
    for s in &life.segments {
        let (whole, partial) = hour_split(s.end - s.launch);
        let billed = match (life.kind, s.reason) {
            (InstanceKind::Spot, EndReason::MarketPreemption) => whole,
            _ => whole + u64::from(partial),
        };
        for k in 0..billed {
            let hour_start = s.launch + k as f64 * HOUR;
            let market_rate = match life.kind {
                InstanceKind::Spot => trace.price_at(hour_start),
                InstanceKind::Dedicated => fleet.on_demand_rate,
            };
            hours.push(BilledHour { hour_start, market_rate, fee: fleet.orchestration_fee });
        }
    }
    Ok(BillingRecord { instance_id: life.instance_id.clone(), kind: life.kind, hours })
}

pub fn write_billing<W: Write>(records: &[BillingRecord], out: W) -> Result<(), SpotError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BILLING_HEADER)?;
    for r in records {
        for h in &r.hours {
            w.write_record([r.instance_id.clone(), h.hour_start.to_string(), h.rate().to_string()])?;
        }
    }
    w.flush().map_err(|e| SpotError::Io { path: None, source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spot::trace::PricePoint;

    fn trace(points: &[(f64, f64)]) -> PriceTrace {
        PriceTrace::new("m4.4xlarge", 16, points.iter().map(|&(t, price)| PricePoint { t, price }).collect(), None).unwrap()
    }

    fn spot(segments: Vec<LifecycleSegment>) -> InstanceLifecycle {
        InstanceLifecycle { instance_id: "spot-0".into(), kind: InstanceKind::Spot, segments }
    }

    fn fleet(fee: f64) -> FleetSpec {
        FleetSpec { orchestration_fee: fee, ..FleetSpec::default() }
    }

    #[test]
    fn ten_hours_at_constant_price() {
        let life = spot(vec![LifecycleSegment { launch: 0.0, end: 10.0 * HOUR, reason: EndReason::WorkloadComplete }]);
        let bill = bill_instance(&life, &trace(&[(0.0, 0.13)]), BidPolicy::new(0.2).unwrap(), &fleet(0.0)).unwrap();
        assert_eq!(bill.hours.len(), 10);
        assert_eq!(bill.total_cents(), 130);
    }

    #[test]
    fn market_preempted_partial_hour_is_free() {
        let life = spot(vec![LifecycleSegment { launch: 0.0, end: 2.5 * HOUR, reason: EndReason::MarketPreemption }]);
        let t = trace(&[(0.0, 0.13), (2.5 * HOUR, 0.25)]);
        let bill = bill_instance(&life, &t, BidPolicy::new(0.2).unwrap(), &fleet(0.0)).unwrap();
        assert_eq!(bill.hours.iter().map(|h| h.hour_start).collect::<Vec<_>>(), vec![0.0, HOUR]);
        assert_eq!(bill.total_cents(), 26);
    }

    #[test]
    fn self_terminated_partial_hour_is_billed() {
        let life = spot(vec![LifecycleSegment { launch: 0.0, end: 0.25 * HOUR, reason: EndReason::WorkloadComplete }]);
        let bill = bill_instance(&life, &trace(&[(0.0, 0.13)]), BidPolicy::new(0.2).unwrap(), &fleet(0.24)).unwrap();
        assert_eq!(bill.total_cents(), 37);
    }

    #[test]
    fn hour_rate_uses_price_at_hour_start() {
        let t = trace(&[(0.0, 0.10), (1800.0, 0.15), (5400.0, 0.12)]);
        let life = spot(vec![LifecycleSegment { launch: 900.0, end: 900.0 + 2.0 * HOUR, reason: EndReason::WorkloadComplete }]);
        let bill = bill_instance(&life, &t, BidPolicy::new(0.2).unwrap(), &fleet(0.0)).unwrap();
        assert_eq!(bill.hours.iter().map(|h| h.market_rate).collect::<Vec<_>>(), vec![0.10, 0.15]);
    }

    #[test]
    fn dedicated_bills_started_hours_at_on_demand() {
        let life = InstanceLifecycle {
            instance_id: "dedicated-0".into(),
            kind: InstanceKind::Dedicated,
            segments: vec![LifecycleSegment { launch: 0.0, end: 1.2 * HOUR, reason: EndReason::WorkloadComplete }],
        };
        let bill = bill_instance(&life, &trace(&[(0.0, 5.0)]), BidPolicy::new(0.2).unwrap(), &fleet(0.24)).unwrap();
        assert_eq!(bill.hours.len(), 2);
        assert_eq!(bill.total_cents(), 208);
    }

    #[test]
    fn segment_above_bid_is_inconsistent() {
        let t = trace(&[(0.0, 0.13), (HOUR, 0.25)]);
        let life = spot(vec![LifecycleSegment { launch: 0.0, end: 2.0 * HOUR, reason: EndReason::WorkloadComplete }]);
        let err = bill_instance(&life, &t, BidPolicy::new(0.2).unwrap(), &fleet(0.0)).unwrap_err();
        assert!(matches!(err, SpotError::InconsistentLifecycle { .. }));
    }

    #[test]
    fn billing_csv_layout() {
        let life = spot(vec![LifecycleSegment { launch: 0.0, end: 2.0 * HOUR, reason: EndReason::WorkloadComplete }]);
        let bill = bill_instance(&life, &trace(&[(0.0, 0.13)]), BidPolicy::new(0.2).unwrap(), &fleet(0.24)).unwrap();
        let mut buf = Vec::new();
        write_billing(&[bill], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "instance_id,hour_start,rate\nspot-0,0,0.37\nspot-0,3600,0.37\n");
    }

    #[test]
    fn bad_bids_and_fleets_rejected() {
        assert!(BidPolicy::new(0.0).is_err());
        assert!(BidPolicy::new(f64::NAN).is_err());
        assert!(FleetSpec { n_dedicated: 0, ..FleetSpec::default() }.validate().is_err());
        assert!(FleetSpec { cores: 0, ..FleetSpec::default() }.validate().is_err());
    }
}
