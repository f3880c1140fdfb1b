//! Deterministic FaaS + object-storage provider emulation.
//!
//! [`Simulator`] is the single-threaded event loop. Storage, triggers and the
//! client-facing adapter live in [`crate::client::simulated`], which wraps one
//! simulator per provider. Cross-provider reads are metered by the
//! [`EgressLedger`].

mod config;
mod egress;
mod engine;
mod scenario;

use thiserror::Error;

pub use config::{DistributionSpec, RetryPolicy, SimulatorConfig};
pub use egress::{EgressEntry, EgressLedger};
pub use engine::{
    FirstServed, ScheduledOutcome, SimFunction, SimRequest, SimSummary, Simulator, Terminal,
};
pub use scenario::{
    run_scenario, FunctionSpec, LoadSpec, Scenario, ScenarioOutcome, ScenarioSummary,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulator is closed to new submissions")]
    Closed,
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("submission at virtual time {at} ms is before the clock ({now} ms)")]
    PastSubmission { at: u64, now: u64 },
    #[error("virtual time {event_ms} ms passed the horizon of {horizon_ms} ms (livelock guard)")]
    HorizonExceeded { horizon_ms: u64, event_ms: u64 },
    #[error("request id {0} was already submitted")]
    DuplicateRequest(String),
}
