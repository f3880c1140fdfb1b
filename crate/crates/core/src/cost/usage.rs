//! Aggregation of invocation records into billable quantities.

use serde::{Deserialize, Serialize};

use super::catalog::{CatalogError, PricingScheme};
use crate::records::InvocationRecord;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UsageError {
    #[error("no records with cloud-side data to aggregate")]
    Empty,
    #[error("records span several providers: {0:?}")]
    MixedProviders(Vec<String>),
    #[error("records span several memory allocations: {0:?} MB")]
    MixedMemory(Vec<u32>),
    #[error("extrapolation target must be positive")]
    ZeroExtrapolation,
}

/// Aggregated billable quantities for one provider and memory size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub invocations: u64,
    /// Σ memory_gb × billed seconds, with memory_gb = MB / 1024.
    pub gb_seconds: f64,
    /// Σ allocated GHz × billed seconds. Filled by [`UsageSummary::with_cpu_meter`].
    pub ghz_seconds: f64,
    /// Decimal bytes.
    pub egress_bytes: u64,
    pub ephemeral_gbs_beyond_included: f64,
    /// Σ billed seconds; the basis for CPU and disk metering.
    pub billed_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_mb: Option<u32>,
}

impl UsageSummary {
    pub fn egress_gb(&self) -> f64 {
        self.egress_bytes as f64 / 1e9
    }

    /// Meters CPU time for schemes that charge it, using the scheme's GHz
    /// allocation for this usage's memory tier. No-op for schemes without a
    /// CPU meter.
    pub fn with_cpu_meter(mut self, scheme: &PricingScheme) -> Result<Self, CatalogError> {
        if scheme.cpu_rate_per_ghzs.is_none() {
            self.ghz_seconds = 0.0;
            return Ok(self);
        }
        let memory_mb = self.memory_mb.unwrap_or(0);
        let ghz = scheme.ghz_for_memory(memory_mb)?;
        self.ghz_seconds = ghz * self.billed_seconds;
        Ok(self)
    }

    /// Meters ephemeral disk beyond the scheme's included allowance for the
    /// whole billed time.
    pub fn with_ephemeral_disk(mut self, disk_mb: u32, scheme: &PricingScheme) -> Self {
        let disk_gb = f64::from(disk_mb) / 1024.0;
        let beyond = (disk_gb - scheme.free_tier.ephemeral_included_gb).max(0.0);
        self.ephemeral_gbs_beyond_included = beyond * self.billed_seconds;
        self
    }
}

/// Aggregates records into billable usage.
///
/// Only records with cloud-side attempts count; local-only (unserved) records
/// are skipped. With `extrapolate_to = Some(n)` every aggregate becomes the
/// per-record mean times `n`; otherwise plain sums. Invocations count attempts
/// that got an instance, since throttled attempts are not billed.
pub fn usage_from_records(
    records: &[InvocationRecord],
    extrapolate_to: Option<u64>,
) -> Result<UsageSummary, UsageError> {
    let counted: Vec<&InvocationRecord> = records.iter().filter(|r| r.has_cloud_data()).collect();
    if counted.is_empty() {
        return Err(UsageError::Empty);
    }
    let mut providers: Vec<String> = counted.iter().map(|r| r.provider_id.clone()).collect();
    providers.sort();
    providers.dedup();
    if providers.len() > 1 {
        return Err(UsageError::MixedProviders(providers));
    }
    let mut memories: Vec<u32> = counted.iter().filter_map(|r| r.memory_mb).collect();
    memories.sort_unstable();
    memories.dedup();
    if memories.len() > 1 {
        return Err(UsageError::MixedMemory(memories));
    }
    let memory_mb = memories.first().copied();

    let mut mb_ms: u128 = 0;
    let mut billed_ms: u128 = 0;
    let mut egress: u128 = 0;
    let mut invocations: u128 = 0;
    for r in &counted {
        let mem = u128::from(r.memory_mb.unwrap_or(0));
        let billed = u128::from(r.billed_duration_ms);
        mb_ms += mem * billed;
        billed_ms += billed;
        egress += u128::from(r.egress_bytes);
        invocations += r.served_attempts().count() as u128;
    }
    let n = counted.len() as u128;
    let (num, den) = match extrapolate_to {
        Some(0) => return Err(UsageError::ZeroExtrapolation),
        Some(target) => (u128::from(target), n),
        None => (1, 1),
    };
    let scale_int = |v: u128| -> u64 { ((v * num + den / 2) / den) as u64 };
    let scale_real = |v: u128| -> f64 { v as f64 * num as f64 / den as f64 };
    Ok(UsageSummary {
        invocations: scale_int(invocations),
        gb_seconds: scale_real(mb_ms) / (1024.0 * 1000.0),
        ghz_seconds: 0.0,
        egress_bytes: scale_int(egress),
        ephemeral_gbs_beyond_included: 0.0,
        billed_seconds: scale_real(billed_ms) / 1000.0,
        memory_mb,
    })
}
