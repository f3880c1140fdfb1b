//! Performance statistics, tail classification, cost estimation and ranking.
//!
//! Percentiles use the nearest-rank method on an ascending sort: the p-th
//! percentile of n values is the value at 1-based rank ⌈p·n/100⌉, computed in
//! integer arithmetic on p in thousandths so results do not depend on float
//! rounding.

mod export;
mod rank;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{
    cdf_csv, format_request_count, ranking_text, report_json, table_rows, text_table, REPORT_SCHEMA_VERSION,
};
pub use rank::{rank_providers, RankedProvider, Weights};

use crate::cost::{total_cost, usage_from_records, CatalogError, CostReport, PricingScheme, UsageError};
use crate::logs::{estimate_clock_skew, SkewEstimate};
use crate::records::{AttemptStatus, InvocationRecord, RecordStatus};

/// Percentiles reported for every run.
pub const REPORT_PERCENTILES: [f64; 5] = [50.0, 90.0, 95.0, 99.0, 99.9];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no records carry a {0} value")]
    EmptyField(LatencyField),
    #[error("percentile {0} is outside (0, 100]")]
    BadPercentile(f64),
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("ranking needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("weights must be finite, non-negative and not both zero: ({0}, {1})")]
    BadWeights(f64, f64),
    #[error("reports cover different workloads: {0:?}")]
    MismatchedWorkloads(Vec<String>),
    #[error("report for {0} has no p99 serving latency")]
    MissingLatency(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyField {
    /// Billed duration, summed over attempts.
    Billed,
    /// Cloud start of the first served attempt minus client send.
    Serving,
    /// Client response minus client send.
    Response,
}

impl std::fmt::Display for LatencyField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LatencyField::Billed => "billed",
            LatencyField::Serving => "serving",
            LatencyField::Response => "response",
        })
    }
}

pub fn field_values(records: &[InvocationRecord], field: LatencyField) -> Vec<i64> {
    records
        .iter()
        .filter_map(|r| match field {
            LatencyField::Billed => r.has_cloud_data().then_some(r.billed_duration_ms as i64),
            LatencyField::Serving => r.serving_latency_ms,
            LatencyField::Response => r.response_time_ms,
        })
        .collect()
}

fn check_p(p: f64) -> Result<u64, AnalysisError> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(AnalysisError::BadPercentile(p));
    }
    Ok((p * 1000.0).round() as u64)
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_of_sorted(sorted: &[i64], p: f64) -> Result<i64, AnalysisError> {
    let p_milli = u128::from(check_p(p)?);
    let n = sorted.len() as u128;
    if n == 0 {
        return Err(AnalysisError::BadPercentile(p));
    }
    let rank = (p_milli * n).div_ceil(100_000).max(1);
    Ok(sorted[(rank - 1) as usize])
}

pub fn percentile(records: &[InvocationRecord], field: LatencyField, p: f64) -> Result<i64, AnalysisError> {
    check_p(p)?;
    let mut v = field_values(records, field);
    if v.is_empty() {
        return Err(AnalysisError::EmptyField(field));
    }
    v.sort_unstable();
    percentile_of_sorted(&v, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value_ms: i64,
    pub cumulative_fraction: f64,
}

/// Empirical CDF with one point per distinct value.
pub fn cdf_of_values(values: &[i64]) -> Vec<CdfPoint> {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len() as f64;
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.value_ms == *x => last.cumulative_fraction = fraction,
            _ => points.push(CdfPoint { value_ms: *x, cumulative_fraction: fraction }),
        }
    }
    if let Some(last) = points.last_mut() {
        last.cumulative_fraction = 1.0;
    }
    points
}

pub fn build_cdf(records: &[InvocationRecord], field: LatencyField) -> Result<Vec<CdfPoint>, AnalysisError> {
    let v = field_values(records, field);
    if v.is_empty() {
        return Err(AnalysisError::EmptyField(field));
    }
    Ok(cdf_of_values(&v))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailCounts {
    pub threshold_ms: i64,
    /// Timed out, then waited longer than the threshold to be served again.
    pub scenario_a: usize,
    /// Never timed out, but first served later than the threshold.
    pub scenario_b: usize,
    pub scenario_a_ids: Vec<String>,
    pub scenario_b_ids: Vec<String>,
}

/// Threshold that flags abnormal serving delays for a function timeout.
pub fn default_late_serve_threshold_ms(timeout_s: u64) -> i64 {
    2 * timeout_s as i64 * 1000
}

/// Gap between the end of the first timed-out attempt and the start of the
/// next attempt that got an instance; `None` if none did.
pub fn reserve_gap_ms(record: &InvocationRecord) -> Option<i64> {
    let first_timeout = record.attempts.iter().position(|a| a.status == AttemptStatus::Timeout)?;
    let end = record.attempts[first_timeout].end_ts;
    record.attempts[first_timeout + 1..]
        .iter()
        .find(|a| a.status.was_served())
        .map(|a| a.start_ts - end)
}

/// Labels the two tail patterns. A record is scenario a only if it has a
/// timeout, and scenario b only if it has none, so the sets are disjoint.
pub fn classify_tails(records: &[InvocationRecord], late_serve_threshold_ms: i64) -> TailCounts {
    let mut out = TailCounts { threshold_ms: late_serve_threshold_ms, ..TailCounts::default() };
    for r in records {
        if r.timeout_attempts() > 0 {
            if reserve_gap_ms(r).is_some_and(|g| g > late_serve_threshold_ms) {
                out.scenario_a += 1;
                out.scenario_a_ids.push(r.request_id.to_string());
            }
        } else if r.serving_latency_ms.is_some_and(|l| l > late_serve_threshold_ms) {
            out.scenario_b += 1;
            out.scenario_b_ids.push(r.request_id.to_string());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostPair {
    pub no_free_tier: CostReport,
    pub free_tier: CostReport,
}

/// Extrapolated usage priced with and without the free tier.
pub fn estimate_cost(
    records: &[InvocationRecord],
    scheme: &PricingScheme,
    extrapolate_to: Option<u64>,
) -> Result<CostPair, AnalysisError> {
    let usage = usage_from_records(records, extrapolate_to)?.with_cpu_meter(scheme)?;
    Ok(CostPair {
        no_free_tier: total_cost(&usage, scheme, false),
        free_tier: total_cost(&usage, scheme, true),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub workload_name: String,
    pub provider_id: String,
    pub pricing_scheme: String,
    pub n_records: usize,
    pub mean_billed_ms: f64,
    pub mean_egress_bytes: f64,
    /// Serving latency, keyed by percentile label ("50", "99.9", ...).
    pub latency_percentiles: BTreeMap<String, i64>,
    pub response_percentiles: BTreeMap<String, i64>,
    /// CDF of billed duration.
    pub cdf_points: Vec<CdfPoint>,
    /// Attempts that timed out / were throttled, across all records.
    pub timeout_count: usize,
    pub throttle_count: usize,
    pub unserved_count: usize,
    pub clock_skew_flagged: usize,
    pub skew_estimate: Option<SkewEstimate>,
    pub tail_scenarios: TailCounts,
    pub extrapolate_to: Option<u64>,
    pub cost: CostPair,
}

impl AnalysisReport {
    pub fn p99_serving_ms(&self) -> Option<i64> {
        self.latency_percentiles.get("99").copied()
    }
}

pub fn percentile_label(p: f64) -> String {
    format!("{p}")
}

pub struct AnalysisOptions<'a> {
    pub workload_name: &'a str,
    pub scheme: &'a PricingScheme,
    pub extrapolate_to: Option<u64>,
    pub late_serve_threshold_ms: i64,
}

pub fn analyze(records: &[InvocationRecord], opts: &AnalysisOptions<'_>) -> Result<AnalysisReport, AnalysisError> {
    let cost = estimate_cost(records, opts.scheme, opts.extrapolate_to)?;
    let counted: Vec<&InvocationRecord> = records.iter().filter(|r| r.has_cloud_data()).collect();
    let n = counted.len().max(1) as f64;
    let percentiles = |field| -> BTreeMap<String, i64> {
        let mut v = field_values(records, field);
        v.sort_unstable();
        if v.is_empty() {
            return BTreeMap::new();
        }
        REPORT_PERCENTILES
            .iter()
            .map(|&p| (percentile_label(p), percentile_of_sorted(&v, p).expect("valid p, non-empty")))
            .collect()
    };
    Ok(AnalysisReport {
        workload_name: opts.workload_name.to_string(),
        provider_id: records.first().map(|r| r.provider_id.clone()).unwrap_or_default(),
        pricing_scheme: opts.scheme.provider_id.clone(),
        n_records: records.len(),
        mean_billed_ms: counted.iter().map(|r| r.billed_duration_ms as f64).sum::<f64>() / n,
        mean_egress_bytes: counted.iter().map(|r| r.egress_bytes as f64).sum::<f64>() / n,
        latency_percentiles: percentiles(LatencyField::Serving),
        response_percentiles: percentiles(LatencyField::Response),
        cdf_points: build_cdf(records, LatencyField::Billed)?,
        timeout_count: records.iter().map(InvocationRecord::timeout_attempts).sum(),
        throttle_count: records.iter().map(InvocationRecord::throttle_attempts).sum(),
        unserved_count: records.iter().filter(|r| r.status == RecordStatus::Unserved).count(),
        clock_skew_flagged: records.iter().filter(|r| r.clock_skew_flagged).count(),
        skew_estimate: estimate_clock_skew(records),
        tail_scenarios: classify_tails(records, opts.late_serve_threshold_ms),
        extrapolate_to: opts.extrapolate_to,
        cost,
    })
}
