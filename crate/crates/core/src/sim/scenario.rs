use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SimError, SimFunction, SimRequest, SimSummary, Simulator, SimulatorConfig, Terminal};
use crate::client::InvocationMode;
use crate::records::{ms_to_utc, CloudLogEntry, LocalLogEntry, RequestId, TransportStatus};

/// A self-contained simulation: one provider, one function, a burst load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub provider_id: String,
    /// Epoch milliseconds that virtual time 0 maps to in emitted logs.
    #[serde(default)]
    pub origin_ms: i64,
    pub function: FunctionSpec,
    pub load: LoadSpec,
    pub simulator: SimulatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: String,
    pub memory_mb: u32,
    /// Falls back to the simulator's `timeout_s`.
    #[serde(default)]
    pub timeout_s: Option<u64>,
    #[serde(default)]
    pub max_memory_used_mb: Option<u32>,
    #[serde(default)]
    pub egress_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub total_requests: usize,
    pub burst_size: usize,
    #[serde(default)]
    pub inter_burst_ms: u64,
    /// Async requests get provider retries; sync requests surface throttles
    /// and timeouts to the caller.
    #[serde(default = "default_mode")]
    pub mode: InvocationMode,
}

fn default_mode() -> InvocationMode {
    InvocationMode::Async
}

pub type ScenarioSummary = SimSummary;

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub cloud: Vec<CloudLogEntry>,
    pub local: Vec<LocalLogEntry>,
    pub summary: ScenarioSummary,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.simulator.validate()?;
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.function.memory_mb == 0 {
            return bad("function.memory_mb must be > 0");
        }
        if self.function.timeout_s == Some(0) {
            return bad("function.timeout_s must be > 0");
        }
        if self.load.total_requests == 0 {
            return bad("load.total_requests must be > 0");
        }
        if self.load.burst_size == 0 || self.load.burst_size > self.load.total_requests {
            return bad("load.burst_size must be in 1..=total_requests");
        }
        Ok(())
    }

    fn sim_function(&self) -> SimFunction {
        let timeout_s = self.function.timeout_s.unwrap_or(self.simulator.timeout_s);
        let mut f = SimFunction::new(&self.function.name, self.function.memory_mb, timeout_s);
        if let Some(used) = self.function.max_memory_used_mb {
            f.max_memory_used_mb = used;
        }
        f.egress_bytes = self.function.egress_bytes;
        f
    }
}

/// Runs the scenario to completion on the virtual clock.
///
/// Request ids come from a generator seeded by `rng_seed`, so two runs of the
/// same scenario produce identical cloud and local logs.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, SimError> {
    scenario.validate()?;
    let mut sim = Simulator::new(scenario.simulator.clone())?;
    sim.set_origin_ms(scenario.origin_ms);
    let mut ids = ChaCha8Rng::seed_from_u64(scenario.simulator.rng_seed ^ 0x05ee_d1d5);
    let function = scenario.sim_function();
    let provider_retries = scenario.load.mode == InvocationMode::Async;

    let mut sent = Vec::with_capacity(scenario.load.total_requests);
    for i in 0..scenario.load.total_requests {
        let burst = (i / scenario.load.burst_size) as u64;
        let at = burst * scenario.load.inter_burst_ms;
        let request_id = RequestId::new(format!("{:032x}", ids.gen::<u128>()));
        sim.submit(
            SimRequest { request_id: request_id.clone(), function: function.clone(), provider_retries },
            at,
        )?;
        sent.push((request_id, at));
    }
    let cloud = sim.run_until_idle()?;

    let local = sent
        .into_iter()
        .map(|(request_id, at)| {
            let send_ts = ms_to_utc(scenario.origin_ms + at as i64);
            if provider_retries {
                return LocalLogEntry {
                    request_id,
                    send_ts,
                    response_ts: None,
                    transport_status: TransportStatus::Accepted,
                    error: None,
                };
            }
            let end = cloud
                .iter()
                .filter(|e| e.request_id == request_id)
                .map(|e| e.end_ts)
                .max()
                .unwrap_or(scenario.origin_ms + at as i64);
            let (transport_status, error) = match sim.terminal(&request_id) {
                Some(Terminal::Ok) => (TransportStatus::Ok, None),
                Some(Terminal::TimeoutExhausted) => {
                    (TransportStatus::Timeout, Some("function timed out".to_string()))
                }
                Some(Terminal::ThrottleExhausted) => {
                    (TransportStatus::Throttled, Some("concurrency limit reached".to_string()))
                }
                None => (TransportStatus::Error, Some("no terminal outcome".to_string())),
            };
            LocalLogEntry {
                request_id,
                send_ts,
                response_ts: Some(ms_to_utc(end)),
                transport_status,
                error,
            }
        })
        .collect();

    Ok(ScenarioOutcome { cloud, local, summary: sim.summary() })
}
