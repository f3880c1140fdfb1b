//! In-process providers backed by the discrete-event simulator.
//!
//! A [`SimWorld`] groups providers that can see each other's storage, so a
//! function on one provider can read a bucket on another and have the
//! transfer metered in the shared [`EgressLedger`].
//!
//! Arrival times come from a monotonic clock anchored at a provider's first
//! submission; execution is never waited for in [`ClockMode::Virtual`].
//! [`ClockMode::RealTime`] makes synchronous calls block until the simulated
//! completion time.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Adapter, AdapterKind, BucketRef, Capabilities, ClientError, FunctionRef, InvocationMode,
    InvocationReceipt, InvocationResponse, LocatorPayload, ObjectLocator, ObjectMeta, ProviderRef,
    PutOptions,
};
use crate::cost::{Catalog, PricingScheme};
use crate::records::{AttemptStatus, CloudLogEntry, RequestId};
use crate::sim::{
    EgressLedger, ScheduledOutcome, SimError, SimFunction, SimRequest, SimSummary, Simulator,
    SimulatorConfig,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    #[default]
    Virtual,
    RealTime,
}

/// Function body run when an invocation first gets an instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Handler {
    /// Returns the payload.
    #[default]
    Echo,
    /// Payload is a [`LocatorPayload`]; reads that object, possibly from
    /// another provider, and returns `{"size": n}`.
    FetchObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFunctionSpec {
    pub name: String,
    pub memory_mb: u32,
    /// Falls back to the provider's simulator `timeout_s`.
    #[serde(default)]
    pub timeout_s: Option<u64>,
    #[serde(default)]
    pub max_memory_used_mb: Option<u32>,
    /// Response bytes logged per served attempt.
    #[serde(default)]
    pub egress_bytes: u64,
    #[serde(default)]
    pub handler: Handler,
}

impl SimFunctionSpec {
    pub fn new(name: impl Into<String>, memory_mb: u32) -> Self {
        SimFunctionSpec {
            name: name.into(),
            memory_mb,
            timeout_s: None,
            max_memory_used_mb: None,
            egress_bytes: 0,
            handler: Handler::Echo,
        }
    }

    pub fn with_handler(mut self, handler: Handler) -> Self {
        self.handler = handler;
        self
    }

    pub fn with_timeout_s(mut self, timeout_s: u64) -> Self {
        self.timeout_s = Some(timeout_s);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimProviderSpec {
    pub simulator: SimulatorConfig,
    pub object_storage: bool,
    pub functions: bool,
    pub clock: ClockMode,
    pub buckets: Vec<String>,
    pub deployed: Vec<SimFunctionSpec>,
}

impl Default for SimProviderSpec {
    fn default() -> Self {
        SimProviderSpec {
            simulator: SimulatorConfig::default(),
            object_storage: true,
            functions: true,
            clock: ClockMode::Virtual,
            buckets: Vec::new(),
            deployed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerEvent {
    ObjectCreated,
}

/// Object-created events on `bucket` invoke `target` asynchronously with
/// the object's locator as payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerBinding {
    pub bucket: BucketRef,
    pub event: TriggerEvent,
    pub target: FunctionRef,
}

impl TriggerBinding {
    pub fn object_created(bucket: BucketRef, target: FunctionRef) -> Self {
        TriggerBinding { bucket, event: TriggerEvent::ObjectCreated, target }
    }
}

/// Providers that share storage visibility and an egress ledger.
pub struct SimWorld {
    catalog: Catalog,
    ledger: EgressLedger,
    providers: Mutex<BTreeMap<String, Weak<SimulatedProvider>>>,
}

impl SimWorld {
    pub fn new(catalog: Catalog) -> Arc<Self> {
        Arc::new(SimWorld {
            catalog,
            ledger: EgressLedger::new(),
            providers: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn with_bundled_catalog() -> Arc<Self> {
        Self::new(Catalog::bundled())
    }

    pub fn ledger(&self) -> &EgressLedger {
        &self.ledger
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn provider(&self, provider_id: &str) -> Option<Arc<SimulatedProvider>> {
        lock(&self.providers).get(provider_id).and_then(Weak::upgrade)
    }

    pub fn add_provider(
        self: &Arc<Self>,
        provider: ProviderRef,
        spec: SimProviderSpec,
    ) -> Result<Arc<SimulatedProvider>, ClientError> {
        let id = provider.provider_id.clone();
        let sim_err = |source| ClientError::Simulator { provider: id.clone(), source };
        let sim = Simulator::new(spec.simulator.clone()).map_err(sim_err)?;
        let egress_model = match &spec.simulator.egress_rate_model {
            Some(name) => Some(
                self.catalog
                    .scheme(name)
                    .map_err(|e| ClientError::InvalidArgument(format!("{id}: egress_rate_model: {e}")))?
                    .clone(),
            ),
            None => None,
        };
        let mut providers = lock(&self.providers);
        if providers.get(&id).and_then(Weak::upgrade).is_some() {
            return Err(ClientError::DuplicateProvider(id));
        }
        let p = Arc::new(SimulatedProvider {
            provider,
            world: self.clone(),
            storage_enabled: spec.object_storage,
            functions_enabled: spec.functions,
            clock: spec.clock,
            egress_model,
            default_timeout_s: spec.simulator.timeout_s,
            state: Mutex::new(State {
                sim,
                anchor: None,
                buckets: BTreeMap::new(),
                functions: HashMap::new(),
                triggers: Vec::new(),
                pending: HashMap::new(),
                handler_errors: Vec::new(),
                next_version: 1,
            }),
        });
        providers.insert(id, Arc::downgrade(&p));
        drop(providers);
        for b in &spec.buckets {
            p.create_bucket(b)?;
        }
        for f in spec.deployed {
            p.deploy_function(f)?;
        }
        Ok(p)
    }
}

impl std::fmt::Debug for SimWorld {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimWorld")
            .field("providers", &lock(&self.providers).keys().collect::<Vec<_>>())
            .field("ledger", &self.ledger)
            .finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

struct StoredObject {
    data: Arc<Vec<u8>>,
    etag: String,
    version: u64,
}

struct Deployed {
    spec: SimFunctionSpec,
    sim: SimFunction,
}

struct State {
    sim: Simulator,
    anchor: Option<Instant>,
    buckets: BTreeMap<String, BTreeMap<String, StoredObject>>,
    functions: HashMap<String, Deployed>,
    triggers: Vec<TriggerBinding>,
    /// Async payloads waiting for their first instance.
    pending: HashMap<RequestId, (Handler, Vec<u8>)>,
    handler_errors: Vec<(RequestId, String)>,
    next_version: u64,
}

impl State {
    /// Virtual arrival time for a submission happening now.
    fn arrival_ms(&mut self) -> u64 {
        let anchor = *self.anchor.get_or_insert_with(|| {
            self.sim.set_origin_ms(Utc::now().timestamp_millis());
            Instant::now()
        });
        (anchor.elapsed().as_millis() as u64).max(self.sim.now())
    }
}

pub struct SimulatedProvider {
    provider: ProviderRef,
    world: Arc<SimWorld>,
    storage_enabled: bool,
    functions_enabled: bool,
    clock: ClockMode,
    egress_model: Option<PricingScheme>,
    default_timeout_s: u64,
    state: Mutex<State>,
}

impl SimulatedProvider {
    pub fn world(&self) -> &Arc<SimWorld> {
        &self.world
    }

    fn id(&self) -> String {
        self.provider.provider_id.clone()
    }

    fn capability(&self, capability: &'static str, operation: &str) -> ClientError {
        ClientError::Capability { provider: self.id(), capability, operation: operation.into() }
    }

    fn require_storage(&self, operation: &str) -> Result<(), ClientError> {
        if self.storage_enabled {
            Ok(())
        } else {
            Err(self.capability("object_storage", operation))
        }
    }

    fn require_functions(&self, operation: &str) -> Result<(), ClientError> {
        if self.functions_enabled {
            Ok(())
        } else {
            Err(self.capability("functions", operation))
        }
    }

    fn sim_error(&self, source: SimError) -> ClientError {
        ClientError::Simulator { provider: self.id(), source }
    }

    fn check_own(&self, provider: &ProviderRef) -> Result<(), ClientError> {
        if provider.provider_id != self.provider.provider_id {
            return Err(ClientError::InvalidArgument(format!(
                "{} routed to adapter for {}",
                provider.provider_id, self.provider.provider_id
            )));
        }
        Ok(())
    }

    pub fn create_bucket(&self, bucket: &str) -> Result<BucketRef, ClientError> {
        self.require_storage("create_bucket")?;
        let r = BucketRef::new(self.provider.clone(), bucket)?;
        lock(&self.state).buckets.entry(bucket.to_string()).or_default();
        Ok(r)
    }

    pub fn deploy_function(&self, spec: SimFunctionSpec) -> Result<FunctionRef, ClientError> {
        self.require_functions("deploy_function")?;
        let timeout_s = spec.timeout_s.unwrap_or(self.default_timeout_s);
        let fref = FunctionRef::new(
            self.provider.clone(),
            spec.name.clone(),
            spec.memory_mb,
            u32::try_from(timeout_s)
                .map_err(|_| ClientError::InvalidArgument("timeout_s out of range".into()))?,
        )?;
        let mut sim = SimFunction::new(&spec.name, spec.memory_mb, timeout_s);
        if let Some(used) = spec.max_memory_used_mb {
            sim.max_memory_used_mb = used;
        }
        sim.egress_bytes = spec.egress_bytes;
        lock(&self.state).functions.insert(spec.name.clone(), Deployed { spec, sim });
        Ok(fref)
    }

    pub fn function_ref(&self, name: &str) -> Result<FunctionRef, ClientError> {
        let state = lock(&self.state);
        let d = state.functions.get(name).ok_or_else(|| ClientError::UnknownFunction {
            provider: self.id(),
            function: name.into(),
        })?;
        FunctionRef::new(
            self.provider.clone(),
            name,
            d.spec.memory_mb,
            (d.sim.timeout_ms / 1000) as u32,
        )
    }

    /// Runs every pending event and returns the provider's cloud log.
    pub fn export_logs(&self) -> Result<Vec<CloudLogEntry>, ClientError> {
        let (logs, ready) = {
            let mut state = lock(&self.state);
            let logs = state.sim.run_until_idle().map_err(|e| self.sim_error(e))?;
            (logs, self.take_ready(&mut state))
        };
        self.run_ready(ready);
        Ok(logs)
    }

    pub fn summary(&self) -> SimSummary {
        lock(&self.state).sim.summary()
    }

    /// Requests whose handler failed, with the failure message.
    pub fn handler_errors(&self) -> Vec<(RequestId, String)> {
        lock(&self.state).handler_errors.clone()
    }

    pub fn close(&self) {
        lock(&self.state).sim.close();
    }

    fn take_ready(&self, state: &mut State) -> Vec<(RequestId, Handler, Vec<u8>)> {
        state
            .sim
            .drain_first_served()
            .into_iter()
            .filter_map(|fs| {
                state.pending.remove(&fs.request_id).map(|(h, p)| (fs.request_id, h, p))
            })
            .collect()
    }

    /// Runs async handlers outside the state lock: a handler may read from
    /// this or another provider.
    fn run_ready(&self, ready: Vec<(RequestId, Handler, Vec<u8>)>) {
        for (id, handler, payload) in ready {
            if let Err(e) = self.run_handler(handler, &payload) {
                lock(&self.state).handler_errors.push((id, e.to_string()));
            }
        }
    }

    fn run_handler(&self, handler: Handler, payload: &[u8]) -> Result<Vec<u8>, ClientError> {
        match handler {
            Handler::Echo => Ok(payload.to_vec()),
            Handler::FetchObject => {
                let loc: LocatorPayload = serde_json::from_slice(payload).map_err(|e| {
                    ClientError::Function { provider: self.id(), message: format!("payload: {e}") }
                })?;
                let owner = self.world.provider(&loc.provider_id).ok_or_else(|| {
                    ClientError::Function {
                        provider: self.id(),
                        message: format!("storage provider {} not in this world", loc.provider_id),
                    }
                })?;
                let locator = ObjectLocator::new(owner.provider.clone(), loc.bucket, loc.key)?;
                let data = owner.get_object(&locator, Some(&self.provider))?;
                Ok(serde_json::json!({ "size": data.len() }).to_string().into_bytes())
            }
        }
    }

    fn sleep_until_virtual(&self, state_anchor: Option<Instant>, virtual_ms: u64) {
        if self.clock != ClockMode::RealTime {
            return;
        }
        if let Some(anchor) = state_anchor {
            let due = anchor + Duration::from_millis(virtual_ms);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
    }

    fn bucket_missing(&self, bucket: &str) -> ClientError {
        ClientError::NoSuchBucket { provider: self.id(), bucket: bucket.into() }
    }
}

impl Adapter for SimulatedProvider {
    fn provider(&self) -> &ProviderRef {
        &self.provider
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::Simulated
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            object_storage: self.storage_enabled,
            functions: self.functions_enabled,
            storage_triggers: self.storage_enabled && self.functions_enabled,
        }
    }

    fn probe(&self) -> Result<(), ClientError> {
        Ok(())
    }

    fn put_object(
        &self,
        loc: &ObjectLocator,
        body: &[u8],
        opts: &PutOptions,
    ) -> Result<ObjectMeta, ClientError> {
        self.require_storage("put_object")?;
        self.check_own(&loc.provider)?;
        let (meta, fired) = {
            let mut state = lock(&self.state);
            let version = state.next_version;
            let objects =
                state.buckets.get_mut(&loc.bucket).ok_or_else(|| self.bucket_missing(&loc.bucket))?;
            let etag = format!("\"{}\"", &hex::encode(Sha256::digest(body))[..32]);
            objects.insert(
                loc.key.clone(),
                StoredObject { data: Arc::new(body.to_vec()), etag: etag.clone(), version },
            );
            state.next_version += 1;
            let fired: Vec<FunctionRef> = state
                .triggers
                .iter()
                .filter(|t| t.bucket.bucket == loc.bucket)
                .map(|t| t.target.clone())
                .collect();
            let meta =
                ObjectMeta { size: body.len() as u64, etag, version: Some(version.to_string()) };
            (meta, fired)
        };
        if !fired.is_empty() {
            let payload = serde_json::to_vec(&LocatorPayload::from(loc))
                .map_err(|e| ClientError::InvalidArgument(e.to_string()))?;
            let base = opts.request_id.clone().unwrap_or_else(RequestId::random);
            for (n, target) in fired.iter().enumerate() {
                let id = if n == 0 { base.clone() } else { RequestId::new(format!("{base}.{n}")) };
                self.invoke_function(target, &payload, InvocationMode::Async, id)?;
            }
        }
        Ok(meta)
    }

    fn get_object(
        &self,
        loc: &ObjectLocator,
        reader: Option<&ProviderRef>,
    ) -> Result<Vec<u8>, ClientError> {
        self.require_storage("get_object")?;
        self.check_own(&loc.provider)?;
        let data = {
            let state = lock(&self.state);
            let objects =
                state.buckets.get(&loc.bucket).ok_or_else(|| self.bucket_missing(&loc.bucket))?;
            let obj = objects.get(&loc.key).ok_or_else(|| ClientError::NotFound {
                provider: self.id(),
                bucket: loc.bucket.clone(),
                key: loc.key.clone(),
            })?;
            obj.data.clone()
        };
        self.world.ledger.meter_transfer(loc, reader, data.len() as u64, self.egress_model.as_ref());
        Ok(data.as_ref().clone())
    }

    fn head_object(&self, loc: &ObjectLocator) -> Result<ObjectMeta, ClientError> {
        self.require_storage("head_object")?;
        self.check_own(&loc.provider)?;
        let state = lock(&self.state);
        let objects =
            state.buckets.get(&loc.bucket).ok_or_else(|| self.bucket_missing(&loc.bucket))?;
        let obj = objects.get(&loc.key).ok_or_else(|| ClientError::NotFound {
            provider: self.id(),
            bucket: loc.bucket.clone(),
            key: loc.key.clone(),
        })?;
        Ok(ObjectMeta {
            size: obj.data.len() as u64,
            etag: obj.etag.clone(),
            version: Some(obj.version.to_string()),
        })
    }

    fn delete_object(&self, loc: &ObjectLocator) -> Result<(), ClientError> {
        self.require_storage("delete_object")?;
        self.check_own(&loc.provider)?;
        let mut state = lock(&self.state);
        let objects =
            state.buckets.get_mut(&loc.bucket).ok_or_else(|| self.bucket_missing(&loc.bucket))?;
        objects.remove(&loc.key);
        Ok(())
    }

    fn list_objects(&self, bucket: &str, prefix: &str) -> Result<Vec<String>, ClientError> {
        self.require_storage("list_objects")?;
        let state = lock(&self.state);
        let objects = state.buckets.get(bucket).ok_or_else(|| self.bucket_missing(bucket))?;
        Ok(objects.keys().filter(|k| k.starts_with(prefix)).cloned().collect())
    }

    fn invoke_function(
        &self,
        function: &FunctionRef,
        payload: &[u8],
        mode: InvocationMode,
        request_id: RequestId,
    ) -> Result<InvocationReceipt, ClientError> {
        self.require_functions("invoke_function")?;
        self.check_own(&function.provider)?;
        let (outcome, handler, ready, anchor) = {
            let mut state = lock(&self.state);
            let deployed = state.functions.get(&function.function_name).ok_or_else(|| {
                ClientError::UnknownFunction {
                    provider: self.id(),
                    function: function.function_name.clone(),
                }
            })?;
            if deployed.spec.memory_mb != function.memory_mb {
                return Err(ClientError::InvalidArgument(format!(
                    "{} is deployed with {} MB, not {} MB",
                    function.function_name, deployed.spec.memory_mb, function.memory_mb
                )));
            }
            let handler = deployed.spec.handler;
            let req = SimRequest {
                request_id: request_id.clone(),
                function: deployed.sim.clone(),
                provider_retries: mode == InvocationMode::Async,
            };
            let at = state.arrival_ms();
            let outcome = state.sim.submit(req, at).map_err(|e| self.sim_error(e))?;
            if mode == InvocationMode::Async {
                state.pending.insert(request_id.clone(), (handler, payload.to_vec()));
            }
            let mut ready = self.take_ready(&mut state);
            ready.retain(|(id, _, _)| *id != request_id || mode == InvocationMode::Async);
            (outcome, handler, ready, state.anchor)
        };
        self.run_ready(ready);

        if mode == InvocationMode::Async {
            return Ok(InvocationReceipt { request_id, response: InvocationResponse::Accepted });
        }
        match outcome {
            ScheduledOutcome::Throttled { attempt, retry_at } => Err(ClientError::Throttled {
                provider: self.id(),
                request_id,
                attempt,
                retry_after_ms: retry_at,
            }),
            ScheduledOutcome::Started { end_ts, status, .. } => {
                self.sleep_until_virtual(anchor, end_ts);
                if status != AttemptStatus::Ok {
                    return Err(ClientError::Timeout {
                        provider: self.id(),
                        request_id,
                        timeout_s: function.timeout_s,
                    });
                }
                let body = self.run_handler(handler, payload)?;
                Ok(InvocationReceipt { request_id, response: InvocationResponse::Body(body) })
            }
        }
    }

    fn bind_trigger(&self, binding: &TriggerBinding) -> Result<(), ClientError> {
        self.require_storage("bind_trigger")?;
        self.require_functions("bind_trigger")?;
        self.check_own(&binding.bucket.provider)?;
        if binding.target.provider.provider_id != binding.bucket.provider.provider_id {
            return Err(ClientError::CrossProviderTrigger {
                bucket_provider: binding.bucket.provider.provider_id.clone(),
                function_provider: binding.target.provider.provider_id.clone(),
            });
        }
        let mut state = lock(&self.state);
        if !state.buckets.contains_key(&binding.bucket.bucket) {
            return Err(self.bucket_missing(&binding.bucket.bucket));
        }
        if !state.functions.contains_key(&binding.target.function_name) {
            return Err(ClientError::UnknownFunction {
                provider: self.id(),
                function: binding.target.function_name.clone(),
            });
        }
        state.triggers.push(binding.clone());
        Ok(())
    }
}

impl std::fmt::Debug for SimulatedProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulatedProvider").field("provider", &self.provider.provider_id).finish()
    }
}
