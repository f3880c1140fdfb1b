//! A common interface over object storage and function invocation.
//!
//! Every backend implements [`Adapter`]. A [`Registry`] maps provider ids to
//! adapters and is immutable once built, so it can be shared across worker
//! threads without locking. [`facade`] layers provider-idiomatic verbs on top.

pub mod credentials;
pub mod facade;
pub mod s3http;
pub mod signer;
pub mod simulated;
mod types;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use credentials::{CredentialStore, Credentials, IniCredentialStore};
pub use facade::{facade, Envelope, Param, Params, S3Facade, FACADE_MAPPING};
pub use s3http::S3HttpAdapter;
pub use simulated::{
    ClockMode, Handler, SimFunctionSpec, SimProviderSpec, SimWorld, SimulatedProvider,
    TriggerBinding, TriggerEvent,
};
pub use types::{
    AdapterKind, BucketRef, Capabilities, FunctionRef, InvocationMode, InvocationReceipt,
    InvocationResponse, LocatorPayload, ObjectLocator, ObjectMeta, ProviderRef, PutOptions,
};

use crate::records::RequestId;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown adapter kind {0:?} (expected simulated or s3-compatible-http)")]
    UnknownAdapterKind(String),
    #[error("provider {0:?} is already registered")]
    DuplicateProvider(String),
    #[error("no adapter registered for provider {0:?}")]
    NoAdapter(String),
    #[error("{provider}: object {bucket}/{key} not found")]
    NotFound { provider: String, bucket: String, key: String },
    #[error("{provider}: bucket {bucket:?} does not exist")]
    NoSuchBucket { provider: String, bucket: String },
    #[error("{provider}: function {function:?} is not deployed")]
    UnknownFunction { provider: String, function: String },
    #[error("{provider}: request {request_id} throttled on attempt {attempt}")]
    Throttled { provider: String, request_id: RequestId, attempt: u32, retry_after_ms: Option<u64> },
    #[error("{provider}: request {request_id} timed out after {timeout_s} s")]
    Timeout { provider: String, request_id: RequestId, timeout_s: u32 },
    #[error("{provider} lacks capability {capability} required by {operation}")]
    Capability { provider: String, capability: &'static str, operation: String },
    #[error(
        "cannot bind bucket on {bucket_provider} to function on {function_provider}: \
         storage events only trigger functions of the same provider"
    )]
    CrossProviderTrigger { bucket_provider: String, function_provider: String },
    #[error("credentials: {0}")]
    Credentials(String),
    #[error("{provider}: unreachable: {message}")]
    Unreachable { provider: String, message: String },
    #[error("{provider}: transport error: {message}")]
    Transport { provider: String, message: String },
    #[error("{provider}: HTTP {status} {code}: {message}")]
    Backend { provider: String, status: u16, code: String, message: String },
    #[error("{provider}: function error: {message}")]
    Function { provider: String, message: String },
    #[error("{verb}: unmapped parameters {params:?}")]
    UnmappedParameters { verb: String, params: Vec<String> },
    #[error("{verb}: missing required parameter {param}")]
    MissingParameter { verb: String, param: String },
    #[error("unknown facade verb or style {0:?}")]
    UnknownVerb(String),
    #[error("{provider}: simulator: {source}")]
    Simulator { provider: String, source: SimError },
}

impl ClientError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, ClientError::NotFound { .. })
    }
}

/// One backend. Implementations must tolerate concurrent calls.
pub trait Adapter: Send + Sync {
    fn provider(&self) -> &ProviderRef;
    fn kind(&self) -> AdapterKind;
    fn capabilities(&self) -> Capabilities;
    /// Cheap reachability check.
    fn probe(&self) -> Result<(), ClientError>;

    fn put_object(
        &self,
        loc: &ObjectLocator,
        body: &[u8],
        opts: &PutOptions,
    ) -> Result<ObjectMeta, ClientError>;
    /// `reader` is the provider on whose behalf the read happens, `None`
    /// for the client host.
    fn get_object(
        &self,
        loc: &ObjectLocator,
        reader: Option<&ProviderRef>,
    ) -> Result<Vec<u8>, ClientError>;
    fn head_object(&self, loc: &ObjectLocator) -> Result<ObjectMeta, ClientError>;
    /// Idempotent: deleting a missing key succeeds.
    fn delete_object(&self, loc: &ObjectLocator) -> Result<(), ClientError>;
    /// Keys in `bucket` starting with `prefix`, sorted.
    fn list_objects(&self, bucket: &str, prefix: &str) -> Result<Vec<String>, ClientError>;

    fn invoke_function(
        &self,
        function: &FunctionRef,
        payload: &[u8],
        mode: InvocationMode,
        request_id: RequestId,
    ) -> Result<InvocationReceipt, ClientError>;

    fn bind_trigger(&self, _binding: &TriggerBinding) -> Result<(), ClientError> {
        Err(ClientError::Capability {
            provider: self.provider().provider_id.clone(),
            capability: "storage_triggers",
            operation: "bind_trigger".into(),
        })
    }
}

/// Collects adapters, then freezes into a [`Registry`].
pub struct RegistryBuilder {
    adapters: BTreeMap<String, Arc<dyn Adapter>>,
    world: Option<Arc<SimWorld>>,
    credentials: Option<Arc<dyn CredentialStore>>,
}

impl Default for RegistryBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl RegistryBuilder {
    pub fn new() -> Self {
        RegistryBuilder { adapters: BTreeMap::new(), world: None, credentials: None }
    }

    /// World that simulated providers join; defaults to one with the bundled catalog.
    pub fn with_world(mut self, world: Arc<SimWorld>) -> Self {
        self.world = Some(world);
        self
    }

    pub fn with_credentials(mut self, store: Arc<dyn CredentialStore>) -> Self {
        self.credentials = Some(store);
        self
    }

    pub fn world(&mut self) -> Arc<SimWorld> {
        self.world.get_or_insert_with(SimWorld::with_bundled_catalog).clone()
    }

    /// Creates an adapter of `kind` for `provider` with default settings.
    pub fn register_adapter(
        &mut self,
        provider: ProviderRef,
        kind: AdapterKind,
    ) -> Result<Arc<dyn Adapter>, ClientError> {
        self.check_unique(&provider.provider_id)?;
        let adapter: Arc<dyn Adapter> = match kind {
            AdapterKind::Simulated => {
                self.world().add_provider(provider, SimProviderSpec::default())?
            }
            AdapterKind::S3CompatibleHttp => {
                let store = self.credentials.clone().ok_or_else(|| {
                    ClientError::Credentials(format!(
                        "no credentials store configured for {}",
                        provider.provider_id
                    ))
                })?;
                Arc::new(S3HttpAdapter::new(provider, store))
            }
        };
        self.register(adapter.clone())?;
        Ok(adapter)
    }

    /// Registers a simulated provider with an explicit spec and returns it
    /// for setup (buckets, functions, triggers).
    pub fn register_simulated(
        &mut self,
        provider: ProviderRef,
        spec: SimProviderSpec,
    ) -> Result<Arc<SimulatedProvider>, ClientError> {
        self.check_unique(&provider.provider_id)?;
        let sim = self.world().add_provider(provider, spec)?;
        self.register(sim.clone())?;
        Ok(sim)
    }

    pub fn register(&mut self, adapter: Arc<dyn Adapter>) -> Result<(), ClientError> {
        let id = adapter.provider().provider_id.clone();
        self.check_unique(&id)?;
        self.adapters.insert(id, adapter);
        Ok(())
    }

    fn check_unique(&self, id: &str) -> Result<(), ClientError> {
        if self.adapters.contains_key(id) {
            return Err(ClientError::DuplicateProvider(id.to_string()));
        }
        Ok(())
    }

    pub fn build(self) -> Registry {
        Registry { adapters: self.adapters, world: self.world }
    }
}

/// Immutable routing table from provider id to adapter.
pub struct Registry {
    adapters: BTreeMap<String, Arc<dyn Adapter>>,
    world: Option<Arc<SimWorld>>,
}

impl Registry {
    pub fn adapter(&self, provider_id: &str) -> Result<&Arc<dyn Adapter>, ClientError> {
        self.adapters.get(provider_id).ok_or_else(|| ClientError::NoAdapter(provider_id.to_string()))
    }

    pub fn provider_ids(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }

    /// The simulated world, if any simulated provider was registered.
    pub fn world(&self) -> Option<&Arc<SimWorld>> {
        self.world.as_ref()
    }

    /// Adapter for `provider`, checking the registered endpoint matches.
    fn route(&self, provider: &ProviderRef) -> Result<&Arc<dyn Adapter>, ClientError> {
        let adapter = self.adapter(&provider.provider_id)?;
        if adapter.provider().endpoint != provider.endpoint {
            return Err(ClientError::InvalidArgument(format!(
                "provider {} is registered with endpoint {}, not {}",
                provider.provider_id,
                adapter.provider().endpoint,
                provider.endpoint
            )));
        }
        Ok(adapter)
    }

    pub fn capabilities(&self, provider_id: &str) -> Result<Capabilities, ClientError> {
        Ok(self.adapter(provider_id)?.capabilities())
    }

    pub fn probe(&self, provider_id: &str) -> Result<(), ClientError> {
        self.adapter(provider_id)?.probe()
    }

    pub fn put_object(&self, loc: &ObjectLocator, body: &[u8]) -> Result<ObjectMeta, ClientError> {
        self.put_object_with(loc, body, &PutOptions::default())
    }

    pub fn put_object_with(
        &self,
        loc: &ObjectLocator,
        body: &[u8],
        opts: &PutOptions,
    ) -> Result<ObjectMeta, ClientError> {
        self.route(&loc.provider)?.put_object(loc, body, opts)
    }

    pub fn get_object(&self, loc: &ObjectLocator) -> Result<Vec<u8>, ClientError> {
        self.route(&loc.provider)?.get_object(loc, None)
    }

    /// Reads `loc` on behalf of a function running on `reader`.
    pub fn get_object_as(
        &self,
        loc: &ObjectLocator,
        reader: &ProviderRef,
    ) -> Result<Vec<u8>, ClientError> {
        self.route(&loc.provider)?.get_object(loc, Some(reader))
    }

    pub fn head_object(&self, loc: &ObjectLocator) -> Result<ObjectMeta, ClientError> {
        self.route(&loc.provider)?.head_object(loc)
    }

    pub fn delete_object(&self, loc: &ObjectLocator) -> Result<(), ClientError> {
        self.route(&loc.provider)?.delete_object(loc)
    }

    pub fn list_objects(
        &self,
        provider: &ProviderRef,
        bucket: &str,
        prefix: &str,
    ) -> Result<Vec<String>, ClientError> {
        self.route(provider)?.list_objects(bucket, prefix)
    }

    /// Invokes with a fresh random request id.
    pub fn invoke_function(
        &self,
        function: &FunctionRef,
        payload: &[u8],
        mode: InvocationMode,
    ) -> Result<InvocationReceipt, ClientError> {
        self.invoke_function_with_id(function, payload, mode, RequestId::random())
    }

    pub fn invoke_function_with_id(
        &self,
        function: &FunctionRef,
        payload: &[u8],
        mode: InvocationMode,
        request_id: RequestId,
    ) -> Result<InvocationReceipt, ClientError> {
        self.route(&function.provider)?.invoke_function(function, payload, mode, request_id)
    }

    pub fn bind_trigger(&self, binding: &TriggerBinding) -> Result<(), ClientError> {
        self.route(&binding.bucket.provider)?.bind_trigger(binding)
    }
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("providers", &self.adapters.keys()).finish()
    }
}
