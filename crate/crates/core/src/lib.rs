//! Stixel ensemble species-distribution modeling with a checkpointed,
//! preemption-tolerant execution engine, a spot-market cluster simulator and
//! a deployment cost model.

pub mod cost;
pub mod domain;
pub mod exec;
pub mod model;
pub mod seed;
pub mod spot;
pub mod synth;
