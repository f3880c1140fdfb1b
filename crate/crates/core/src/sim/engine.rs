//! Discrete-event FaaS execution model.
//!
//! Each simulator owns a virtual millisecond clock and a single event queue.
//! A request arriving while `concurrency_limit` executions are in flight is
//! throttled and, when provider retries apply, re-enqueued after the policy's
//! backoff. A request that finds capacity reuses a warm idle instance of its
//! function if one is within keep-alive, otherwise pays a sampled cold start.
//! Service time is sampled at start; if it exceeds the function timeout the
//! attempt ends at the timeout, is billed in full, and the instance is
//! discarded.
//!
//! Ties at the same virtual instant process completions before arrivals, so
//! a slot freed at t is usable by a request arriving at t.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::SimulatorConfig;
use super::SimError;
use crate::records::{AttemptStatus, CloudLogEntry, RequestId};

/// Execution profile of a deployed function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimFunction {
    pub name: String,
    pub memory_mb: u32,
    pub timeout_ms: u64,
    pub max_memory_used_mb: u32,
    /// Response bytes reported per served attempt.
    pub egress_bytes: u64,
}

impl SimFunction {
    pub fn new(name: impl Into<String>, memory_mb: u32, timeout_s: u64) -> Self {
        SimFunction {
            name: name.into(),
            memory_mb,
            timeout_ms: timeout_s * 1000,
            max_memory_used_mb: memory_mb / 4,
            egress_bytes: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimRequest {
    pub request_id: RequestId,
    pub function: SimFunction,
    /// When false, a throttle or timeout is terminal (synchronous callers
    /// retry themselves).
    pub provider_retries: bool,
}

/// What happened to an attempt at the moment it arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduledOutcome {
    Started {
        attempt: u32,
        start_ts: u64,
        end_ts: u64,
        cold_start: bool,
        status: AttemptStatus,
    },
    Throttled {
        attempt: u32,
        /// Virtual time of the next attempt, if one is scheduled.
        retry_at: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    Ok,
    TimeoutExhausted,
    ThrottleExhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SimSummary {
    pub submitted: usize,
    pub ok: usize,
    pub timeout_exhausted: usize,
    pub throttle_exhausted: usize,
    pub in_flight: usize,
    pub throttle_events: usize,
    pub timeout_events: usize,
    pub cold_starts: usize,
}

/// An attempt that was the first of its request to get an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstServed {
    pub request_id: RequestId,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Completion { req: usize, instance_survives: bool, terminal: Option<Terminal> },
    Arrival { req: usize, attempt: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    /// 0 = completion, 1 = arrival.
    class: u8,
    seq: u64,
    kind: EventKind,
}

struct RequestState {
    req: SimRequest,
    terminal: Option<Terminal>,
    served_once: bool,
}

pub struct Simulator {
    config: SimulatorConfig,
    rng: ChaCha8Rng,
    clock: u64,
    origin_ms: i64,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    busy: usize,
    /// Per function, the virtual times at which idle instances were released.
    idle: HashMap<String, Vec<u64>>,
    requests: Vec<RequestState>,
    index: HashMap<RequestId, usize>,
    logs: Vec<CloudLogEntry>,
    first_served: Vec<FirstServed>,
    closed: bool,
}

impl Simulator {
    pub fn new(config: SimulatorConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Simulator {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            clock: 0,
            origin_ms: 0,
            queue: BinaryHeap::new(),
            seq: 0,
            busy: 0,
            idle: HashMap::new(),
            requests: Vec::new(),
            index: HashMap::new(),
            logs: Vec::new(),
            first_served: Vec::new(),
            closed: false,
        })
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.config
    }

    /// Offset added to virtual times in emitted log timestamps.
    pub fn set_origin_ms(&mut self, origin_ms: i64) {
        self.origin_ms = origin_ms;
    }

    pub fn origin_ms(&self) -> i64 {
        self.origin_ms
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn has_submissions(&self) -> bool {
        !self.requests.is_empty()
    }

    /// Rejects all further submissions.
    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Submits a request arriving at virtual time `at`. Events due at or
    /// before `at` are processed first.
    pub fn submit(&mut self, req: SimRequest, at: u64) -> Result<ScheduledOutcome, SimError> {
        if self.closed {
            return Err(SimError::Closed);
        }
        if at < self.clock {
            return Err(SimError::PastSubmission { at, now: self.clock });
        }
        if self.index.contains_key(&req.request_id) {
            return Err(SimError::DuplicateRequest(req.request_id.to_string()));
        }
        self.advance_to(at)?;
        let idx = self.requests.len();
        self.index.insert(req.request_id.clone(), idx);
        self.requests.push(RequestState { req, terminal: None, served_once: false });
        Ok(self.arrive(idx, 1, at))
    }

    /// Processes every event due at or before `t` and moves the clock to `t`.
    pub fn advance_to(&mut self, t: u64) -> Result<(), SimError> {
        self.check_horizon(t)?;
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time > t {
                break;
            }
            self.queue.pop();
            self.process(ev);
        }
        self.clock = self.clock.max(t);
        Ok(())
    }

    /// Drains the event queue and returns every log entry so far, sorted by
    /// start time (emission order breaks ties).
    pub fn run_until_idle(&mut self) -> Result<Vec<CloudLogEntry>, SimError> {
        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            self.check_horizon(ev.time)?;
            self.queue.pop();
            self.clock = self.clock.max(ev.time);
            self.process(ev);
        }
        Ok(self.logs())
    }

    pub fn logs(&self) -> Vec<CloudLogEntry> {
        let mut logs = self.logs.clone();
        logs.sort_by_key(|e| e.start_ts);
        logs
    }

    /// First-served notifications since the last drain.
    pub fn drain_first_served(&mut self) -> Vec<FirstServed> {
        std::mem::take(&mut self.first_served)
    }

    pub fn terminal(&self, id: &RequestId) -> Option<Terminal> {
        self.index.get(id).and_then(|&i| self.requests[i].terminal)
    }

    pub fn summary(&self) -> SimSummary {
        let mut s = SimSummary { submitted: self.requests.len(), ..Default::default() };
        for r in &self.requests {
            match r.terminal {
                Some(Terminal::Ok) => s.ok += 1,
                Some(Terminal::TimeoutExhausted) => s.timeout_exhausted += 1,
                Some(Terminal::ThrottleExhausted) => s.throttle_exhausted += 1,
                None => s.in_flight += 1,
            }
        }
        for e in &self.logs {
            match e.status {
                AttemptStatus::Throttled => s.throttle_events += 1,
                AttemptStatus::Timeout => s.timeout_events += 1,
                AttemptStatus::Ok => {}
            }
            if e.cold_start {
                s.cold_starts += 1;
            }
        }
        s
    }

    fn check_horizon(&self, t: u64) -> Result<(), SimError> {
        let horizon_ms = self.config.horizon_s.saturating_mul(1000);
        if t > horizon_ms {
            return Err(SimError::HorizonExceeded { horizon_ms, event_ms: t });
        }
        Ok(())
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        let class = match kind {
            EventKind::Completion { .. } => 0,
            EventKind::Arrival { .. } => 1,
        };
        self.seq += 1;
        self.queue.push(Reverse(Event { time, class, seq: self.seq, kind }));
    }

    fn process(&mut self, ev: Event) {
        match ev.kind {
            EventKind::Completion { req, instance_survives, terminal } => {
                self.busy -= 1;
                if instance_survives {
                    let name = self.requests[req].req.function.name.clone();
                    self.idle.entry(name).or_default().push(ev.time);
                }
                if terminal.is_some() {
                    self.requests[req].terminal = terminal;
                }
            }
            EventKind::Arrival { req, attempt } => {
                self.arrive(req, attempt, ev.time);
            }
        }
    }

    fn take_warm_instance(&mut self, function: &str, now: u64) -> bool {
        let keep_alive_ms = self.config.instance_keep_alive_s.saturating_mul(1000);
        let Some(pool) = self.idle.get_mut(function) else {
            return false;
        };
        pool.retain(|&since| since.saturating_add(keep_alive_ms) >= now);
        pool.pop().is_some()
    }

    fn arrive(&mut self, idx: usize, attempt: u32, now: u64) -> ScheduledOutcome {
        let function = self.requests[idx].req.function.clone();
        let retries_allowed = self.requests[idx].req.provider_retries
            && attempt < self.config.retry_policy.max_attempts;
        let request_id = self.requests[idx].req.request_id.clone();

        if self.busy >= self.config.concurrency_limit {
            let retry_at = if retries_allowed {
                let at = now + self.config.retry_policy.backoff_after(attempt);
                self.push(at, EventKind::Arrival { req: idx, attempt: attempt + 1 });
                Some(at)
            } else {
                self.requests[idx].terminal = Some(Terminal::ThrottleExhausted);
                None
            };
            self.logs.push(CloudLogEntry {
                request_id,
                function_name: function.name,
                start_ts: self.origin_ms + now as i64,
                end_ts: self.origin_ms + now as i64,
                billed_duration_ms: 0,
                memory_mb: function.memory_mb,
                max_memory_used_mb: 0,
                cold_start: false,
                status: AttemptStatus::Throttled,
                attempt,
                egress_bytes: 0,
            });
            return ScheduledOutcome::Throttled { attempt, retry_at };
        }

        self.busy += 1;
        let warm = self.take_warm_instance(&function.name, now);
        let cold_ms = if warm { 0 } else { self.config.cold_start_ms.sample_ms(&mut self.rng) };
        let service_ms = self.config.warm_service_ms.sample_ms(&mut self.rng);
        let start = now + cold_ms;
        let timed_out = service_ms > function.timeout_ms;
        let (end, billed, status) = if timed_out {
            (start + function.timeout_ms, function.timeout_ms, AttemptStatus::Timeout)
        } else {
            let g = self.config.billing_granularity_ms;
            (start + service_ms, service_ms.div_ceil(g) * g, AttemptStatus::Ok)
        };
        let terminal = if !timed_out {
            Some(Terminal::Ok)
        } else if retries_allowed {
            let at = end + self.config.retry_policy.backoff_after(attempt);
            self.push(at, EventKind::Arrival { req: idx, attempt: attempt + 1 });
            None
        } else {
            Some(Terminal::TimeoutExhausted)
        };
        self.push(end, EventKind::Completion { req: idx, instance_survives: !timed_out, terminal });
        if !self.requests[idx].served_once {
            self.requests[idx].served_once = true;
            self.first_served.push(FirstServed { request_id: request_id.clone(), attempt });
        }
        self.logs.push(CloudLogEntry {
            request_id,
            function_name: function.name,
            start_ts: self.origin_ms + start as i64,
            end_ts: self.origin_ms + end as i64,
            billed_duration_ms: billed,
            memory_mb: function.memory_mb,
            max_memory_used_mb: function.max_memory_used_mb.min(function.memory_mb),
            cold_start: !warm,
            status,
            attempt,
            egress_bytes: if status == AttemptStatus::Ok { function.egress_bytes } else { 0 },
        });
        ScheduledOutcome::Started { attempt, start_ts: start, end_ts: end, cold_start: !warm, status }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{DistributionSpec, RetryPolicy};

    fn config(limit: usize, cold: f64, service: f64) -> SimulatorConfig {
        SimulatorConfig {
            concurrency_limit: limit,
            cold_start_ms: DistributionSpec::constant(cold),
            warm_service_ms: DistributionSpec::constant(service),
            retry_policy: RetryPolicy { max_attempts: 10, backoff_ms: vec![1000] },
            ..SimulatorConfig::default()
        }
    }

    fn req(i: usize, retries: bool) -> SimRequest {
        SimRequest {
            request_id: RequestId::new(format!("r{i:04}")),
            function: SimFunction::new("f", 1024, 20),
            provider_retries: retries,
        }
    }

    #[test]
    fn burst_at_limit_all_cold_no_throttle() {
        let mut sim = Simulator::new(config(50, 100.0, 1000.0)).unwrap();
        for i in 0..50 {
            sim.submit(req(i, true), 0).unwrap();
        }
        let logs = sim.run_until_idle().unwrap();
        assert_eq!(logs.len(), 50);
        assert!(logs.iter().all(|e| e.cold_start && e.status == AttemptStatus::Ok));
        assert_eq!(sim.summary().throttle_events, 0);
    }

    #[test]
    fn burst_over_limit_throttles() {
        let mut sim = Simulator::new(config(50, 100.0, 1000.0)).unwrap();
        for i in 0..100 {
            sim.submit(req(i, true), 0).unwrap();
        }
        sim.run_until_idle().unwrap();
        let s = sim.summary();
        assert!(s.throttle_events >= 50);
        assert_eq!(s.ok, 100);
    }

    #[test]
    fn warm_instances_are_reused_within_keep_alive() {
        let mut sim = Simulator::new(config(1, 100.0, 1000.0)).unwrap();
        sim.submit(req(0, true), 0).unwrap();
        let second = sim.submit(req(1, true), 5000).unwrap();
        assert!(matches!(second, ScheduledOutcome::Started { cold_start: false, .. }));
        // keep-alive is 600 s
        let third = sim.submit(req(2, true), 5000 + 700_000).unwrap();
        assert!(matches!(third, ScheduledOutcome::Started { cold_start: true, .. }));
    }

    #[test]
    fn timeout_bills_full_timeout_and_retries() {
        let mut c = config(5, 0.0, 25_000.0);
        c.retry_policy = RetryPolicy { max_attempts: 3, backoff_ms: vec![1000, 2000] };
        let mut sim = Simulator::new(c).unwrap();
        sim.submit(req(0, true), 0).unwrap();
        let logs = sim.run_until_idle().unwrap();
        assert_eq!(logs.len(), 3);
        assert!(logs.iter().all(|e| e.status == AttemptStatus::Timeout));
        assert!(logs.iter().all(|e| e.billed_duration_ms == 20_000));
        // attempts at 0, 21000, 43000 → last ends at 63000
        assert_eq!(logs[2].start_ts, 43_000);
        assert_eq!(logs[2].end_ts, 63_000);
        assert_eq!(sim.summary().timeout_exhausted, 1);
    }

    #[test]
    fn sync_requests_do_not_retry() {
        let mut sim = Simulator::new(config(1, 0.0, 1000.0)).unwrap();
        sim.submit(req(0, false), 0).unwrap();
        let out = sim.submit(req(1, false), 0).unwrap();
        assert_eq!(out, ScheduledOutcome::Throttled { attempt: 1, retry_at: None });
        sim.run_until_idle().unwrap();
        assert_eq!(sim.summary().throttle_exhausted, 1);
    }

    #[test]
    fn billed_duration_rounds_up_to_granularity() {
        let mut c = config(1, 0.0, 1001.0);
        c.billing_granularity_ms = 100;
        let mut sim = Simulator::new(c).unwrap();
        sim.submit(req(0, true), 0).unwrap();
        let logs = sim.run_until_idle().unwrap();
        assert_eq!(logs[0].billed_duration_ms, 1100);
        assert_eq!(logs[0].end_ts - logs[0].start_ts, 1001);
    }

    #[test]
    fn closed_simulator_rejects_submissions() {
        let mut sim = Simulator::new(config(1, 0.0, 1.0)).unwrap();
        sim.close();
        assert!(matches!(sim.submit(req(0, true), 0), Err(SimError::Closed)));
    }

    #[test]
    fn no_submissions_no_logs() {
        let mut sim = Simulator::new(SimulatorConfig::default()).unwrap();
        assert!(sim.run_until_idle().unwrap().is_empty());
    }

    #[test]
    fn horizon_guard_aborts() {
        let mut c = config(1, 0.0, 1000.0);
        c.horizon_s = 10;
        c.retry_policy = RetryPolicy { max_attempts: 100, backoff_ms: vec![5000] };
        let mut sim = Simulator::new(c).unwrap();
        sim.submit(req(0, true), 0).unwrap();
        sim.submit(req(1, true), 0).unwrap();
        // request 1 retries at 5 s, is served; a long chain pushes past 10 s
        for i in 2..20 {
            sim.submit(req(i, true), 0).unwrap();
        }
        assert!(matches!(sim.run_until_idle(), Err(SimError::HorizonExceeded { .. })));
    }

    #[test]
    fn duplicate_and_past_submissions_rejected() {
        let mut sim = Simulator::new(config(1, 0.0, 1.0)).unwrap();
        sim.submit(req(0, true), 10).unwrap();
        assert!(matches!(sim.submit(req(0, true), 10), Err(SimError::DuplicateRequest(_))));
        assert!(matches!(sim.submit(req(1, true), 5), Err(SimError::PastSubmission { .. })));
    }

    #[test]
    fn origin_offsets_timestamps() {
        let mut sim = Simulator::new(config(1, 10.0, 100.0)).unwrap();
        sim.set_origin_ms(1_000_000);
        sim.submit(req(0, true), 0).unwrap();
        let logs = sim.run_until_idle().unwrap();
        assert_eq!(logs[0].start_ts, 1_000_010);
    }
}
