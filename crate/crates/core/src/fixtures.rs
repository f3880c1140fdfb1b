//! Deterministic log fixtures with known aggregate statistics, for tests,
//! demos and `multifaas analyze` dry runs.
//!
//! A [`Profile`] pins the mean billed duration, per-request egress and the
//! p99 serving latency of a synthetic run. Generated logs go through the
//! normal join, so the fixtures exercise the same path as real runs.

use chrono::Utc;
use serde_json::json;

use crate::logs::{join_logs, LogError, RunDir, RunManifest, RunStore};
use crate::records::{
    ms_to_utc, AttemptStatus, CloudLogEntry, InvocationRecord, LocalLogEntry, RequestId, TransportStatus,
};

/// 2022-11-01T00:00:00Z; fixture clocks start here.
pub const FIXTURE_EPOCH_MS: i64 = 1_667_260_800_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub provider_id: &'static str,
    pub pricing_scheme: &'static str,
    pub workload_name: &'static str,
    pub function_name: &'static str,
    pub n: usize,
    pub memory_mb: u32,
    /// Σ billed duration over all records; the mean is this over `n`.
    pub total_billed_ms: u64,
    pub egress_bytes_per_request: u64,
    /// Serving latency at nearest rank ⌈0.99·n⌉.
    pub p99_serving_ms: i64,
}

impl Profile {
    pub fn mean_billed_ms(&self) -> f64 {
        self.total_billed_ms as f64 / self.n as f64
    }
}

const IMAGE: &str = "image-processing";
const ML: &str = "ml-training";

fn image(provider_id: &'static str, pricing_scheme: &'static str, total_billed_ms: u64, p99: i64) -> Profile {
    Profile {
        provider_id,
        pricing_scheme,
        workload_name: IMAGE,
        function_name: "image-resize",
        n: 1000,
        memory_mb: 1024,
        total_billed_ms,
        egress_bytes_per_request: 482_000,
        p99_serving_ms: p99,
    }
}

/// Image-processing profiles: 1 GB, 482 KB egress per request, mean billed
/// 1937 / 2421.5 / 2380.7 ms, p99 serving 5388 / 12254 / 9496 ms.
pub fn image_processing_profiles() -> [Profile; 3] {
    [
        image("sim-aws", "aws-lambda-x86", 1_937_000, 5388),
        image("sim-gcf", "gcf-tier1", 2_421_500, 12254),
        image("sim-alibaba", "alibaba-fc", 2_380_700, 9496),
    ]
}

fn ml(provider_id: &'static str, pricing_scheme: &'static str, billed_s: u64) -> Profile {
    Profile {
        provider_id,
        pricing_scheme,
        workload_name: ML,
        function_name: "text-train",
        n: 100,
        memory_mb: 2048,
        total_billed_ms: billed_s * 1000 * 100,
        egress_bytes_per_request: 0,
        p99_serving_ms: 900,
    }
}

/// ML-training profiles: 2 GB, billed 133 / 159 / 138 s per request.
pub fn ml_training_profiles() -> [Profile; 3] {
    [ml("sim-aws", "aws-lambda-x86", 133), ml("sim-gcf", "gcf-tier1", 159), ml("sim-alibaba", "alibaba-fc", 138)]
}

/// Billed durations spread symmetrically around the mean; sums to
/// `total_billed_ms` exactly.
fn billed_durations(p: &Profile) -> Vec<u64> {
    let n = p.n as u64;
    let (base, extra) = (p.total_billed_ms / n, p.total_billed_ms % n);
    let spread = (base / 4).min(500);
    (0..n)
        .map(|i| {
            let d = base + u64::from(i < extra);
            // Pairs (2k, 2k+1) get +s and -s.
            let s = if spread == 0 { 0 } else { (i / 2) % spread };
            if i + 1 == n && n % 2 == 1 {
                d
            } else if i % 2 == 0 {
                d + s
            } else {
                d - s
            }
        })
        .collect()
}

/// Ascending serving latencies with the p99 rank pinned; shuffled into
/// request order by a fixed stride so neighbours differ.
fn serving_latencies(p: &Profile) -> Vec<i64> {
    let n = p.n;
    let rank = (99 * n).div_ceil(100);
    let floor = 80.min(p.p99_serving_ms);
    let sorted: Vec<i64> = (0..n)
        .map(|i| {
            if i < rank {
                floor + (p.p99_serving_ms - floor) * i as i64 / (rank - 1).max(1) as i64
            } else {
                p.p99_serving_ms + 25 * (i + 1 - rank) as i64
            }
        })
        .collect();
    let stride = (1..n).rev().find(|s| gcd(*s, n) == 1 && *s < n / 2 + 1).unwrap_or(1);
    (0..n).map(|i| sorted[(i * stride) % n]).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Cloud and local logs for a profile: one successful attempt per request.
pub fn profile_logs(p: &Profile) -> (Vec<CloudLogEntry>, Vec<LocalLogEntry>) {
    let billed = billed_durations(p);
    let serving = serving_latencies(p);
    let mut cloud = Vec::with_capacity(p.n);
    let mut local = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let id = RequestId::new(format!("{}-{i:04}", p.provider_id));
        let send = FIXTURE_EPOCH_MS + 10 * i as i64;
        let start = send + serving[i];
        let end = start + billed[i] as i64;
        cloud.push(CloudLogEntry {
            request_id: id.clone(),
            function_name: p.function_name.to_string(),
            start_ts: start,
            end_ts: end,
            billed_duration_ms: billed[i],
            memory_mb: p.memory_mb,
            max_memory_used_mb: p.memory_mb / 4,
            cold_start: i % 50 == 0,
            status: AttemptStatus::Ok,
            attempt: 1,
            egress_bytes: p.egress_bytes_per_request,
        });
        local.push(LocalLogEntry {
            request_id: id,
            send_ts: ms_to_utc(send),
            response_ts: Some(ms_to_utc(end + 20)),
            transport_status: TransportStatus::Ok,
            error: None,
        });
    }
    (cloud, local)
}

pub fn profile_records(p: &Profile) -> Vec<InvocationRecord> {
    let (cloud, local) = profile_logs(p);
    join_logs(&cloud, &local, p.provider_id).expect("fixture ids are unique")
}

/// Writes a profile as a run directory (manifest, local and cloud logs).
pub fn write_fixture_run(store: &RunStore, p: &Profile, catalog_version: &str) -> Result<RunDir, LogError> {
    let (cloud, local) = profile_logs(p);
    let manifest = RunManifest {
        run_id: format!("fixture-{}-{}", p.workload_name, p.provider_id),
        workload_name: p.workload_name.to_string(),
        provider_id: p.provider_id.to_string(),
        catalog_version: catalog_version.to_string(),
        started_at: Utc::now(),
        spec: json!({
            "fixture": true,
            "n": p.n,
            "memory_mb": p.memory_mb,
            "timeout_s": 20,
            "total_billed_ms": p.total_billed_ms,
            "egress_bytes_per_request": p.egress_bytes_per_request,
            "p99_serving_ms": p.p99_serving_ms,
        }),
        pricing_scheme: Some(p.pricing_scheme.to_string()),
    };
    let dir = store.create_run(&manifest)?;
    dir.append_local(&local)?;
    dir.append_cloud(&cloud)?;
    Ok(dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailLabel {
    ScenarioA,
    ScenarioB,
    Neither,
}

/// Hand-built records around a 20 s timeout (threshold 40 s), each with the
/// label it should receive.
pub fn tail_fixtures() -> Vec<(InvocationRecord, TailLabel)> {
    use AttemptStatus::{Ok, Throttled, Timeout};
    use TailLabel::*;
    let t0 = FIXTURE_EPOCH_MS;
    let cases: Vec<(&str, Vec<(AttemptStatus, i64, i64)>, TailLabel)> = vec![
        // Timed out at 20 s, re-served at 70 s.
        ("a-timeout-late-reserve", vec![(Timeout, 0, 20_000), (Ok, 70_000, 71_500)], ScenarioA),
        ("a-two-timeouts", vec![(Timeout, 100, 20_100), (Timeout, 65_100, 85_100), (Ok, 145_100, 146_000)], ScenarioA),
        ("a-throttle-between", vec![(Timeout, 0, 20_000), (Throttled, 65_000, 65_000), (Ok, 125_000, 126_000)], ScenarioA),
        // First served at 60 s, never timed out.
        ("b-first-serve-late", vec![(Ok, 60_000, 61_900)], ScenarioB),
        ("b-throttled-then-late", vec![(Throttled, 0, 0), (Ok, 45_000, 46_000)], ScenarioB),
        ("n-normal", vec![(Ok, 200, 2_100)], Neither),
        ("n-timeout-quick-reserve", vec![(Timeout, 0, 20_000), (Ok, 25_000, 26_000)], Neither),
        ("n-timeout-never-reserved", vec![(Timeout, 0, 20_000)], Neither),
        ("n-at-threshold", vec![(Ok, 40_000, 41_000)], Neither),
    ];
    let mut cloud = Vec::new();
    let mut local = Vec::new();
    let mut labels = Vec::new();
    for (id, attempts, label) in cases {
        for (k, (status, start, end)) in attempts.into_iter().enumerate() {
            cloud.push(CloudLogEntry {
                request_id: id.into(),
                function_name: "tail".into(),
                start_ts: t0 + start,
                end_ts: t0 + end,
                billed_duration_ms: if status.was_served() { (end - start) as u64 } else { 0 },
                memory_mb: 1024,
                max_memory_used_mb: 128,
                cold_start: k == 0,
                status,
                attempt: k as u32 + 1,
                egress_bytes: 0,
            });
        }
        local.push(LocalLogEntry {
            request_id: id.into(),
            send_ts: ms_to_utc(t0),
            response_ts: None,
            transport_status: TransportStatus::Accepted,
            error: None,
        });
        labels.push(label);
    }
    let records = join_logs(&cloud, &local, "sim-tail").expect("fixture ids are unique");
    records.into_iter().zip(labels).collect()
}
