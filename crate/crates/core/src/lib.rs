//! Multi-cloud FaaS benchmarking and cost analysis.
//!
//! The crate is organised along the pipeline an operator walks through:
//!
//! - [`client`]: a common interface over object storage and function
//!   invocation, an adapter registry, and an S3-style facade.
//! - [`sim`]: a deterministic discrete-event FaaS + storage provider.
//! - [`driver`]: burst workload generation with client-side logging.
//! - [`logs`]: cloud log ingestion, normalisation and the local/cloud join.
//! - [`analysis`]: percentiles, CDFs, tail classification and provider ranking.
//! - [`cost`]: the pricing catalog and fee computation.

pub mod analysis;
pub mod client;
pub mod cost;
pub mod driver;
pub mod fixtures;
pub mod logs;
pub mod money;
pub mod records;
pub mod sim;

pub use money::{Money, UnitPrice};
pub use records::{
    AttemptStatus, CloudLogEntry, InvocationRecord, LocalLogEntry, RecordStatus, RequestId,
    TransportStatus,
};
