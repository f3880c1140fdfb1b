use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::LogError;
use crate::records::{
    CloudLogEntry, InvocationRecord, LocalLogEntry, RecordStatus, RequestId,
};

/// Full outer join of cloud and local logs on `request_id`.
///
/// Output order: local entries in input order, then cloud-only requests in
/// order of first appearance. Attempts of one request collapse into one
/// record carrying the full history.
pub fn join_logs(
    cloud: &[CloudLogEntry],
    local: &[LocalLogEntry],
    provider_id: &str,
) -> Result<Vec<InvocationRecord>, LogError> {
    let mut attempts: HashMap<&RequestId, Vec<&CloudLogEntry>> = HashMap::new();
    let mut cloud_order: Vec<&RequestId> = Vec::new();
    let mut seen_pairs = HashSet::new();
    for e in cloud {
        if !seen_pairs.insert((&e.request_id, e.attempt)) {
            return Err(LogError::DuplicateAttempt {
                request_id: e.request_id.to_string(),
                attempt: e.attempt,
            });
        }
        attempts
            .entry(&e.request_id)
            .or_insert_with(|| {
                cloud_order.push(&e.request_id);
                Vec::new()
            })
            .push(e);
    }

    let mut records = Vec::with_capacity(local.len().max(cloud_order.len()));
    let mut local_ids = HashSet::new();
    for l in local {
        if !local_ids.insert(&l.request_id) {
            return Err(LogError::DuplicateLocal(l.request_id.to_string()));
        }
        let cloud_side = attempts.get(&l.request_id).map(Vec::as_slice).unwrap_or(&[]);
        records.push(build(&l.request_id, provider_id, Some(l), cloud_side));
    }
    for id in cloud_order {
        if !local_ids.contains(id) {
            records.push(build(id, provider_id, None, &attempts[id]));
        }
    }
    Ok(records)
}

fn build(
    id: &RequestId,
    provider_id: &str,
    local: Option<&LocalLogEntry>,
    attempts: &[&CloudLogEntry],
) -> InvocationRecord {
    let mut history: Vec<CloudLogEntry> = attempts.iter().map(|e| (*e).clone()).collect();
    history.sort_by_key(|e| (e.attempt, e.start_ts));
    let first_served = history.iter().find(|a| a.status.was_served());
    let cloud_start_ts = first_served.or(history.first()).map(|a| a.start_ts);
    let cloud_end_ts = history.iter().map(|a| a.end_ts).max();
    let send_ts = local.map(LocalLogEntry::send_ms);
    let response_ts = local.and_then(LocalLogEntry::response_ms);
    let serving_latency_ms = match (first_served, send_ts) {
        (Some(a), Some(s)) => Some(a.start_ts - s),
        _ => None,
    };
    let status = history.last().map_or(RecordStatus::Unserved, |a| a.status.into());
    InvocationRecord {
        request_id: id.clone(),
        provider_id: provider_id.to_string(),
        send_ts,
        response_ts,
        cloud_start_ts,
        cloud_end_ts,
        billed_duration_ms: history.iter().map(|a| a.billed_duration_ms).sum(),
        memory_mb: history.first().map(|a| a.memory_mb),
        egress_bytes: history.iter().map(|a| a.egress_bytes).sum(),
        cold_start: first_served.is_some_and(|a| a.cold_start),
        status,
        attempt: history.iter().map(|a| a.attempt).max().unwrap_or(0),
        serving_latency_ms,
        response_time_ms: match (response_ts, send_ts) {
            (Some(r), Some(s)) => Some(r - s),
            _ => None,
        },
        clock_skew_flagged: serving_latency_ms.is_some_and(|v| v < 0),
        transport_status: local.map(|l| l.transport_status),
        attempts: history,
    }
}

/// Median of cloud start minus client send over warm, single-attempt,
/// successful requests. Reported next to latencies, never subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewEstimate {
    pub median_ms: i64,
    pub samples: usize,
}

pub fn estimate_clock_skew(records: &[InvocationRecord]) -> Option<SkewEstimate> {
    let mut v: Vec<i64> = records
        .iter()
        .filter(|r| r.status == RecordStatus::Ok && r.attempt == 1 && !r.cold_start)
        .filter_map(|r| r.serving_latency_ms)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(SkewEstimate { median_ms: v[(v.len() - 1) / 2], samples: v.len() })
}
