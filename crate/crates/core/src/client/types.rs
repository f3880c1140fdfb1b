use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

use super::ClientError;
use crate::records::RequestId;

/// A provider as known to the registry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderRef {
    pub provider_id: String,
    pub endpoint: Url,
    pub region: String,
    /// Section name in the credentials file.
    pub credentials_ref: String,
}

impl ProviderRef {
    pub fn new(
        provider_id: impl Into<String>,
        endpoint: &str,
        region: impl Into<String>,
        credentials_ref: impl Into<String>,
    ) -> Result<Self, ClientError> {
        let provider_id = provider_id.into();
        if provider_id.trim().is_empty() {
            return Err(ClientError::InvalidArgument("provider_id must not be empty".into()));
        }
        let endpoint = Url::parse(endpoint).map_err(|e| {
            ClientError::InvalidArgument(format!("endpoint {endpoint:?} for {provider_id}: {e}"))
        })?;
        Ok(ProviderRef {
            provider_id,
            endpoint,
            region: region.into(),
            credentials_ref: credentials_ref.into(),
        })
    }

    /// A provider on the in-process simulator, `sim://<id>`.
    pub fn simulated(provider_id: &str) -> Self {
        ProviderRef::new(provider_id, &format!("sim://{provider_id}"), "sim-region-1", "sim")
            .expect("simulated provider ids form valid URLs")
    }
}

impl fmt::Display for ProviderRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.provider_id)
    }
}

fn validate_bucket(bucket: &str) -> Result<(), ClientError> {
    if bucket.is_empty() {
        return Err(ClientError::InvalidArgument("bucket must not be empty".into()));
    }
    Ok(())
}

/// A bucket on a specific provider.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BucketRef {
    pub provider: ProviderRef,
    pub bucket: String,
}

impl BucketRef {
    pub fn new(provider: ProviderRef, bucket: impl Into<String>) -> Result<Self, ClientError> {
        let bucket = bucket.into();
        validate_bucket(&bucket)?;
        Ok(BucketRef { provider, bucket })
    }

    pub fn object(&self, key: impl Into<String>) -> Result<ObjectLocator, ClientError> {
        ObjectLocator::new(self.provider.clone(), self.bucket.clone(), key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectLocator {
    pub provider: ProviderRef,
    pub bucket: String,
    pub key: String,
}

impl ObjectLocator {
    pub fn new(
        provider: ProviderRef,
        bucket: impl Into<String>,
        key: impl Into<String>,
    ) -> Result<Self, ClientError> {
        let bucket = bucket.into();
        let key = key.into();
        validate_bucket(&bucket)?;
        if key.is_empty() {
            return Err(ClientError::InvalidArgument("key must not be empty".into()));
        }
        if key.starts_with('/') {
            return Err(ClientError::InvalidArgument(format!("key {key:?} has a leading slash")));
        }
        Ok(ObjectLocator { provider, bucket, key })
    }
}

/// Wire form of a locator inside invocation payloads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocatorPayload {
    pub provider_id: String,
    pub bucket: String,
    pub key: String,
}

impl From<&ObjectLocator> for LocatorPayload {
    fn from(loc: &ObjectLocator) -> Self {
        LocatorPayload {
            provider_id: loc.provider.provider_id.clone(),
            bucket: loc.bucket.clone(),
            key: loc.key.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionRef {
    pub provider: ProviderRef,
    pub function_name: String,
    pub memory_mb: u32,
    pub timeout_s: u32,
}

impl FunctionRef {
    pub fn new(
        provider: ProviderRef,
        function_name: impl Into<String>,
        memory_mb: u32,
        timeout_s: u32,
    ) -> Result<Self, ClientError> {
        let function_name = function_name.into();
        if function_name.is_empty() {
            return Err(ClientError::InvalidArgument("function_name must not be empty".into()));
        }
        if memory_mb == 0 {
            return Err(ClientError::InvalidArgument("memory_mb must be > 0".into()));
        }
        if timeout_s == 0 {
            return Err(ClientError::InvalidArgument("timeout_s must be > 0".into()));
        }
        Ok(FunctionRef { provider, function_name, memory_mb, timeout_s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    Simulated,
    S3CompatibleHttp,
}

impl FromStr for AdapterKind {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(AdapterKind::Simulated),
            "s3-compatible-http" => Ok(AdapterKind::S3CompatibleHttp),
            other => Err(ClientError::UnknownAdapterKind(other.to_string())),
        }
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterKind::Simulated => "simulated",
            AdapterKind::S3CompatibleHttp => "s3-compatible-http",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub object_storage: bool,
    pub functions: bool,
    pub storage_triggers: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMeta {
    pub size: u64,
    pub etag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvocationMode {
    Sync,
    Async,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvocationResponse {
    /// Synchronous result body.
    Body(Vec<u8>),
    /// Asynchronous request accepted for later execution.
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationReceipt {
    pub request_id: RequestId,
    pub response: InvocationResponse,
}

/// Options for `put_object` beyond locator and body.
#[derive(Debug, Clone, Default)]
pub struct PutOptions {
    /// Propagated to storage-triggered invocations as their request id.
    pub request_id: Option<RequestId>,
}
