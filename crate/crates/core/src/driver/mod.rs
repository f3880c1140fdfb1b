//! Burst workload generation with client-side logging.
//!
//! Each burst runs `burst_size` worker threads that prepare their request,
//! meet at a barrier, then send together. Entries flow to a single channel
//! sink and are ordered by (burst, slot) afterwards, so the output order does
//! not depend on thread scheduling.

use std::sync::mpsc;
use std::sync::{Arc, Barrier};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    BucketRef, ClientError, FunctionRef, InvocationMode, InvocationResponse, LocatorPayload,
    PutOptions, Registry, TriggerBinding,
};
use crate::records::{LocalLogEntry, RequestId, TransportStatus};

pub const DEFAULT_SKEW_BUDGET_MS: u64 = 50;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid workload {name}: {reason}")]
    Invalid { name: String, reason: String },
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    Http,
    StorageEvent,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Http => "http",
            Trigger::StorageEvent => "storage-event",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Function(FunctionRef),
    Binding {
        bucket: BucketRef,
        function: FunctionRef,
    },
}

impl Target {
    pub fn function(&self) -> &FunctionRef {
        match self {
            Target::Function(f) => f,
            Target::Binding { function, .. } => function,
        }
    }

    pub fn binding(&self) -> Option<TriggerBinding> {
        match self {
            Target::Function(_) => None,
            Target::Binding { bucket, function } => {
                Some(TriggerBinding::object_created(bucket.clone(), function.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PayloadTemplate {
    Inline { bytes: Vec<u8> },
    /// Deterministic filler of `size_bytes`.
    Synthetic { size_bytes: u64 },
    /// Pipeline-disabled wiring: each request first stores `size_bytes` in a
    /// bucket on another provider and the function receives its locator.
    ForeignObject { storage: BucketRef, size_bytes: u64 },
}

impl PayloadTemplate {
    pub fn size_bytes(&self) -> u64 {
        match self {
            PayloadTemplate::Inline { bytes } => bytes.len() as u64,
            PayloadTemplate::Synthetic { size_bytes }
            | PayloadTemplate::ForeignObject { size_bytes, .. } => *size_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub trigger: Trigger,
    pub target: Target,
    pub total_requests: usize,
    pub burst_size: usize,
    pub inter_burst_ms: u64,
    pub payload_template: PayloadTemplate,
    pub record_local_log: bool,
    /// Invocation mode for http triggers; storage events are always async.
    pub mode: InvocationMode,
    pub skew_budget_ms: u64,
}

impl WorkloadSpec {
    pub fn http(name: impl Into<String>, function: FunctionRef, total: usize, burst: usize) -> Self {
        WorkloadSpec {
            name: name.into(),
            trigger: Trigger::Http,
            target: Target::Function(function),
            total_requests: total,
            burst_size: burst,
            inter_burst_ms: 0,
            payload_template: PayloadTemplate::Inline { bytes: b"{}".to_vec() },
            record_local_log: true,
            mode: InvocationMode::Sync,
            skew_budget_ms: DEFAULT_SKEW_BUDGET_MS,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let invalid = |reason: &str| {
            Err(DriverError::Invalid { name: self.name.clone(), reason: reason.to_string() })
        };
        if self.name.is_empty() {
            return invalid("name must not be empty");
        }
        if self.total_requests == 0 {
            return invalid("total_requests must be > 0");
        }
        if self.burst_size == 0 || self.burst_size > self.total_requests {
            return invalid("burst_size must be in 1..=total_requests");
        }
        match (self.trigger, &self.target, &self.payload_template) {
            (Trigger::Http, Target::Function(_), _) => {}
            (Trigger::StorageEvent, Target::Binding { .. }, PayloadTemplate::ForeignObject { .. }) => {
                return invalid("storage-event triggers write into the bound bucket, not a foreign one")
            }
            (Trigger::StorageEvent, Target::Binding { .. }, p) if p.size_bytes() == 0 => {
                return invalid("storage-event triggers need a payload size > 0")
            }
            (Trigger::StorageEvent, Target::Binding { .. }, _) => {}
            (Trigger::Http, _, _) => return invalid("http trigger needs a function target"),
            (Trigger::StorageEvent, _, _) => {
                return invalid("storage-event trigger needs a bucket binding target")
            }
        }
        Ok(())
    }

    fn bursts(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.total_requests)
            .step_by(self.burst_size)
            .map(|start| start..(start + self.burst_size).min(self.total_requests))
    }
}

/// How tightly one burst's sends were grouped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BurstStats {
    pub index: usize,
    pub size: usize,
    pub first_send: DateTime<Utc>,
    pub send_skew_ms: i64,
    pub within_budget: bool,
}

#[derive(Debug, Clone)]
pub struct WorkloadRun {
    pub entries: Vec<LocalLogEntry>,
    pub bursts: Vec<BurstStats>,
}

/// Runs `spec` and returns one local log entry per request.
pub fn run_workload(spec: &WorkloadSpec, registry: &Registry) -> Result<Vec<LocalLogEntry>, DriverError> {
    Ok(run_workload_detailed(spec, registry)?.entries)
}

pub fn run_workload_detailed(
    spec: &WorkloadSpec,
    registry: &Registry,
) -> Result<WorkloadRun, DriverError> {
    spec.validate()?;
    registry.adapter(&spec.target.function().provider.provider_id)?;
    if let PayloadTemplate::ForeignObject { storage, .. } = &spec.payload_template {
        registry.adapter(&storage.provider.provider_id)?;
    }

    let mut entries = Vec::with_capacity(spec.total_requests);
    let mut bursts = Vec::new();
    let filler = Arc::new(filler_bytes(match &spec.payload_template {
        PayloadTemplate::Inline { .. } => 0,
        p => p.size_bytes(),
    }));
    let burst_ranges: Vec<_> = spec.bursts().collect();
    let n_bursts = burst_ranges.len();
    for (index, range) in burst_ranges.into_iter().enumerate() {
        let size = range.len();
        let barrier = Barrier::new(size);
        let (tx, rx) = mpsc::channel::<(usize, LocalLogEntry)>();
        std::thread::scope(|s| {
            for slot in range.clone() {
                let tx = tx.clone();
                let barrier = &barrier;
                let filler = filler.clone();
                s.spawn(move || {
                    let request_id = RequestId::random();
                    let prepared = prepare(spec, registry, &request_id, &filler);
                    barrier.wait();
                    let entry = send(spec, registry, request_id, prepared);
                    // the receiver outlives every worker in this scope
                    let _ = tx.send((slot, entry));
                });
            }
        });
        drop(tx);
        let mut burst: Vec<(usize, LocalLogEntry)> = rx.into_iter().collect();
        burst.sort_by_key(|(slot, _)| *slot);
        let first = burst.iter().map(|(_, e)| e.send_ts).min().unwrap_or_else(Utc::now);
        let last = burst.iter().map(|(_, e)| e.send_ts).max().unwrap_or(first);
        let skew = (last - first).num_milliseconds();
        bursts.push(BurstStats {
            index,
            size,
            first_send: first,
            send_skew_ms: skew,
            within_budget: skew <= spec.skew_budget_ms as i64,
        });
        entries.extend(burst.into_iter().map(|(_, e)| e));
        if index + 1 < n_bursts && spec.inter_burst_ms > 0 {
            std::thread::sleep(Duration::from_millis(spec.inter_burst_ms));
        }
    }
    Ok(WorkloadRun { entries, bursts })
}

fn filler_bytes(size: u64) -> Vec<u8> {
    (0..size).map(|i| (i % 251) as u8).collect()
}

enum Prepared {
    Invoke(Vec<u8>),
    Put(Vec<u8>),
    Failed(String),
}

/// Work done before the barrier so it does not widen the send window.
fn prepare(spec: &WorkloadSpec, registry: &Registry, id: &RequestId, filler: &[u8]) -> Prepared {
    match (&spec.trigger, &spec.payload_template) {
        (Trigger::StorageEvent, PayloadTemplate::Inline { bytes }) => Prepared::Put(bytes.clone()),
        (Trigger::StorageEvent, _) => Prepared::Put(filler.to_vec()),
        (Trigger::Http, PayloadTemplate::Inline { bytes }) => Prepared::Invoke(bytes.clone()),
        (Trigger::Http, PayloadTemplate::Synthetic { .. }) => Prepared::Invoke(filler.to_vec()),
        (Trigger::Http, PayloadTemplate::ForeignObject { storage, .. }) => {
            let staged = storage
                .object(format!("{}/{}", spec.name, id))
                .and_then(|loc| registry.put_object(&loc, filler).map(|_| loc));
            match staged.and_then(|loc| {
                serde_json::to_vec(&LocatorPayload::from(&loc))
                    .map_err(|e| ClientError::InvalidArgument(e.to_string()))
            }) {
                Ok(payload) => Prepared::Invoke(payload),
                Err(e) => Prepared::Failed(format!("staging foreign object: {e}")),
            }
        }
    }
}

fn send(spec: &WorkloadSpec, registry: &Registry, request_id: RequestId, prepared: Prepared) -> LocalLogEntry {
    let send_ts = Utc::now();
    let entry = |status, response_ts, error| LocalLogEntry {
        request_id: request_id.clone(),
        send_ts,
        response_ts,
        transport_status: status,
        error,
    };
    match prepared {
        Prepared::Failed(msg) => entry(TransportStatus::Error, None, Some(msg)),
        Prepared::Put(body) => {
            let Target::Binding { bucket, .. } = &spec.target else {
                unreachable!("validated: storage-event targets are bindings")
            };
            let result = bucket.object(format!("{}/{}", spec.name, request_id)).and_then(|loc| {
                let opts = PutOptions { request_id: Some(request_id.clone()) };
                registry.put_object_with(&loc, &body, &opts)
            });
            match result {
                Ok(_) => entry(TransportStatus::Accepted, None, None),
                Err(e) => entry(TransportStatus::Error, None, Some(e.to_string())),
            }
        }
        Prepared::Invoke(payload) => {
            let result = registry.invoke_function_with_id(
                spec.target.function(),
                &payload,
                spec.mode,
                request_id.clone(),
            );
            let now = Some(Utc::now().max(send_ts));
            match result {
                Ok(r) => match r.response {
                    InvocationResponse::Accepted => entry(TransportStatus::Accepted, None, None),
                    InvocationResponse::Body(_) => entry(TransportStatus::Ok, now, None),
                },
                Err(e @ ClientError::Throttled { .. }) => {
                    entry(TransportStatus::Throttled, now, Some(e.to_string()))
                }
                Err(e @ ClientError::Timeout { .. }) => {
                    entry(TransportStatus::Timeout, now, Some(e.to_string()))
                }
                Err(e) => entry(TransportStatus::Error, now, Some(e.to_string())),
            }
        }
    }
}

/// New trigger wiring for [`switch_scenario`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerSwitch {
    Http,
    /// Objects go to `storage`; if it is on another provider than the
    /// function, the result stays http with a foreign-object payload.
    StorageEvent { storage: BucketRef },
}

fn base_name(name: &str) -> &str {
    for suffix in ["-storage-event", "-http"] {
        if let Some(stripped) = name.strip_suffix(suffix) {
            return stripped;
        }
    }
    name
}

/// Returns `spec` rewired to `switch`, with the name suffixed by the
/// resulting trigger kind.
pub fn switch_scenario(
    spec: &WorkloadSpec,
    switch: TriggerSwitch,
    registry: &Registry,
) -> Result<WorkloadSpec, DriverError> {
    let function = spec.target.function().clone();
    let size = spec.payload_template.size_bytes();
    let mut out = spec.clone();
    match switch {
        TriggerSwitch::Http => {
            out.trigger = Trigger::Http;
            out.target = Target::Function(function);
            if matches!(spec.trigger, Trigger::StorageEvent) {
                out.payload_template = PayloadTemplate::Synthetic { size_bytes: size };
            }
        }
        TriggerSwitch::StorageEvent { storage } => {
            let storage_caps = registry.capabilities(&storage.provider.provider_id)?;
            if !storage_caps.object_storage {
                return Err(ClientError::Capability {
                    provider: storage.provider.provider_id.clone(),
                    capability: "object_storage",
                    operation: "switch to storage-event".into(),
                }
                .into());
            }
            if size == 0 {
                return Err(DriverError::Invalid {
                    name: spec.name.clone(),
                    reason: "storage-event triggers need a payload size > 0".into(),
                });
            }
            if storage.provider.provider_id == function.provider.provider_id {
                if !storage_caps.storage_triggers {
                    return Err(ClientError::Capability {
                        provider: storage.provider.provider_id.clone(),
                        capability: "storage_triggers",
                        operation: "switch to storage-event".into(),
                    }
                    .into());
                }
                out.trigger = Trigger::StorageEvent;
                out.target = Target::Binding { bucket: storage, function };
                out.payload_template = PayloadTemplate::Synthetic { size_bytes: size };
            } else {
                out.trigger = Trigger::Http;
                out.target = Target::Function(function);
                out.payload_template = PayloadTemplate::ForeignObject { storage, size_bytes: size };
            }
        }
    }
    out.name = format!("{}-{}", base_name(&spec.name), out.trigger.as_str());
    out.validate()?;
    Ok(out)
}
