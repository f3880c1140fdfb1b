//! Fee structure, pricing catalog and usage aggregation.
//!
//! Fees are computed in exact integer arithmetic: quantities are converted to
//! integer millionths of a unit once, multiplied by pico-dollar rates, and
//! rounded half-up to the micro-dollar. Display rounding to cents happens only
//! when rendering.
//!
//! Unit conventions:
//! - network transfer uses decimal units (1 KB = 10³ B, 1 GB = 10⁹ B);
//! - memory for GB-seconds uses MB / 1024 (a 1024 MB function is 1 GB);
//! - free tiers apply per run rather than per calendar month.

mod catalog;
mod fees;
mod usage;

pub use catalog::{
    load_catalog, Catalog, CatalogError, FreeTier, PricingScheme, TierRate, DEFAULT_CATALOG_TOML,
};
pub use fees::{
    cpu_fee, duration_fee, egress_fee, ephemeral_fee, invocation_fee, tiered_egress_fee,
    total_cost, CostReport,
};
pub use usage::{usage_from_records, UsageError, UsageSummary};

/// GHz allocated to `memory_mb` under `scheme`; errors list the known tiers.
pub fn ghz_for_memory(scheme: &PricingScheme, memory_mb: u32) -> Result<f64, CatalogError> {
    scheme.ghz_for_memory(memory_mb)
}
