//! Capacity, conservation and determinism of the discrete-event simulator.

use std::collections::{BTreeMap, HashMap};

use multifaas::records::{AttemptStatus, CloudLogEntry};
use multifaas::sim::{
    run_scenario, DistributionSpec, FunctionSpec, LoadSpec, RetryPolicy, Scenario, SimulatorConfig,
};
use multifaas::client::InvocationMode;
use proptest::prelude::*;

fn scenario(total: usize, burst: usize, limit: usize, service: DistributionSpec, seed: u64) -> Scenario {
    Scenario {
        name: "prop".into(),
        provider_id: "sim".into(),
        origin_ms: 0,
        function: FunctionSpec {
            name: "f".into(),
            memory_mb: 512,
            timeout_s: Some(5),
            max_memory_used_mb: None,
            egress_bytes: 0,
        },
        load: LoadSpec { total_requests: total, burst_size: burst, inter_burst_ms: 700, mode: InvocationMode::Async },
        simulator: SimulatorConfig {
            concurrency_limit: limit,
            cold_start_ms: DistributionSpec::Uniform { lo: 0.0, hi: 400.0 },
            warm_service_ms: service,
            instance_keep_alive_s: 2,
            retry_policy: RetryPolicy { max_attempts: 4, backoff_ms: vec![300, 900] },
            timeout_s: 5,
            rng_seed: seed,
            egress_rate_model: None,
            billing_granularity_ms: 1,
            horizon_s: 3600,
        },
    }
}

/// Peak number of overlapping [start, end) execution intervals.
fn peak_concurrency(logs: &[CloudLogEntry]) -> usize {
    let mut deltas: BTreeMap<i64, i64> = BTreeMap::new();
    for e in logs.iter().filter(|e| e.status.was_served()) {
        *deltas.entry(e.start_ts).or_default() += 1;
        *deltas.entry(e.end_ts).or_default() -= 1;
    }
    let (mut cur, mut peak) = (0i64, 0i64);
    for d in deltas.values() {
        cur += d;
        peak = peak.max(cur);
    }
    peak as usize
}

fn service_strategy() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (1u32..4000).prop_map(|v| DistributionSpec::constant(f64::from(v))),
        (1u32..3000, 0u32..4000).prop_map(|(lo, w)| DistributionSpec::Uniform {
            lo: f64::from(lo),
            hi: f64::from(lo + w)
        }),
        (5.0f64..8.5, 0.0f64..1.0).prop_map(|(mu, sigma)| DistributionSpec::LogNormal { mu, sigma }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn capacity_and_conservation(
        total in 1usize..300,
        burst_frac in 0.05f64..1.0,
        limit in 1usize..64,
        service in service_strategy(),
        seed in any::<u64>(),
    ) {
        let burst = ((total as f64 * burst_frac).ceil() as usize).clamp(1, total);
        let s = scenario(total, burst, limit, service, seed);
        let out = run_scenario(&s).unwrap();

        prop_assert!(peak_concurrency(&out.cloud) <= limit);

        let sum = out.summary;
        prop_assert_eq!(sum.submitted, total);
        prop_assert_eq!(sum.in_flight, 0);
        prop_assert_eq!(sum.ok + sum.timeout_exhausted + sum.throttle_exhausted, total);

        let mut per_request: HashMap<&str, Vec<&CloudLogEntry>> = HashMap::new();
        for e in &out.cloud {
            per_request.entry(e.request_id.as_str()).or_default().push(e);
        }
        prop_assert_eq!(per_request.len(), total);
        let mut ok = 0;
        for attempts in per_request.values() {
            prop_assert!(attempts.len() <= 4);
            let oks = attempts.iter().filter(|a| a.status == AttemptStatus::Ok).count();
            prop_assert!(oks <= 1);
            ok += oks;
        }
        prop_assert_eq!(ok, sum.ok);
        prop_assert_eq!(out.local.len(), total);
    }
}

#[test]
fn same_seed_same_bytes() {
    let s = scenario(120, 60, 10, DistributionSpec::LogNormal { mu: 7.0, sigma: 0.6 }, 42);
    let a = serde_json::to_string(&run_scenario(&s).unwrap().cloud).unwrap();
    let b = serde_json::to_string(&run_scenario(&s).unwrap().cloud).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_changes_the_draw() {
    let service = DistributionSpec::LogNormal { mu: 7.0, sigma: 0.6 };
    let a = run_scenario(&scenario(50, 50, 10, service.clone(), 1)).unwrap().cloud;
    let b = run_scenario(&scenario(50, 50, 10, service, 2)).unwrap().cloud;
    assert_ne!(a, b);
}

#[test]
fn overlimit_burst_throttles_without_exceeding_limit() {
    let s = scenario(200, 200, 50, DistributionSpec::constant(1000.0), 0);
    let out = run_scenario(&s).unwrap();
    assert_eq!(peak_concurrency(&out.cloud), 50);
    assert!(out.summary.throttle_events >= 150);
}
