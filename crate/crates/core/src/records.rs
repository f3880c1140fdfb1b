//! Log and record types shared by the simulator, driver, log pipeline and
//! analysis.
//!
//! Cloud-side timestamps are integer milliseconds (epoch or virtual clock).
//! Local timestamps are wall-clock UTC and serialise as RFC 3339 with
//! millisecond precision.

use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Client-generated request identifier, carried to the provider so local and
/// cloud logs can be joined without provider-assigned ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(String);

impl RequestId {
    /// 128 random bits, hex encoded.
    pub fn random() -> Self {
        RequestId(format!("{:032x}", rand::random::<u128>()))
    }

    pub fn new(id: impl Into<String>) -> Self {
        RequestId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RequestId {
    fn from(s: &str) -> Self {
        RequestId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttemptStatus {
    Ok,
    Timeout,
    Throttled,
}

impl AttemptStatus {
    /// Whether the attempt got an instance (and was therefore billed).
    pub fn was_served(self) -> bool {
        !matches!(self, AttemptStatus::Throttled)
    }
}

/// One attempt as reported by the provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudLogEntry {
    pub request_id: RequestId,
    pub function_name: String,
    pub start_ts: i64,
    pub end_ts: i64,
    pub billed_duration_ms: u64,
    pub memory_mb: u32,
    pub max_memory_used_mb: u32,
    pub cold_start: bool,
    pub status: AttemptStatus,
    pub attempt: u32,
    /// Response bytes leaving the provider for this attempt. Optional on
    /// import; omitted from exports when zero.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub egress_bytes: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportStatus {
    /// Synchronous response received.
    Ok,
    /// Asynchronous request accepted; no response expected.
    Accepted,
    Throttled,
    Timeout,
    Error,
}

/// Client-side view of one request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalLogEntry {
    pub request_id: RequestId,
    #[serde(with = "rfc3339_ms")]
    pub send_ts: DateTime<Utc>,
    #[serde(default, with = "rfc3339_ms_opt", skip_serializing_if = "Option::is_none")]
    pub response_ts: Option<DateTime<Utc>>,
    pub transport_status: TransportStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LocalLogEntry {
    pub fn send_ms(&self) -> i64 {
        self.send_ts.timestamp_millis()
    }

    pub fn response_ms(&self) -> Option<i64> {
        self.response_ts.map(|t| t.timestamp_millis())
    }
}

pub(crate) mod rfc3339_ms {
    use super::*;

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) mod rfc3339_ms_opt {
    use super::*;

    pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => rfc3339_ms::serialize(t, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| {
            DateTime::parse_from_rfc3339(&s)
                .map(|t| t.with_timezone(&Utc))
                .map_err(serde::de::Error::custom)
        })
        .transpose()
    }
}

/// Millisecond epoch timestamp to UTC, truncated to millisecond precision.
pub fn ms_to_utc(ms: i64) -> DateTime<Utc> {
    DateTime::from_timestamp_millis(ms).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Timeout,
    Throttled,
    /// Sent by the client but never seen in cloud logs.
    Unserved,
}

impl From<AttemptStatus> for RecordStatus {
    fn from(s: AttemptStatus) -> Self {
        match s {
            AttemptStatus::Ok => RecordStatus::Ok,
            AttemptStatus::Timeout => RecordStatus::Timeout,
            AttemptStatus::Throttled => RecordStatus::Throttled,
        }
    }
}

/// One request's unified timeline: local send/response joined with every
/// cloud attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub request_id: RequestId,
    pub provider_id: String,
    pub send_ts: Option<i64>,
    pub response_ts: Option<i64>,
    /// Start of the first attempt that got an instance (first attempt if none did).
    pub cloud_start_ts: Option<i64>,
    /// End of the last attempt.
    pub cloud_end_ts: Option<i64>,
    /// Sum over attempts; throttled attempts bill nothing.
    pub billed_duration_ms: u64,
    pub memory_mb: Option<u32>,
    pub egress_bytes: u64,
    pub cold_start: bool,
    pub status: RecordStatus,
    /// Highest attempt number seen (0 for local-only records).
    pub attempt: u32,
    /// Every cloud attempt in attempt order.
    pub attempts: Vec<CloudLogEntry>,
    pub serving_latency_ms: Option<i64>,
    pub response_time_ms: Option<i64>,
    /// Set when serving latency came out negative, i.e. the cloud clock is
    /// behind the client clock by more than the real latency.
    #[serde(default)]
    pub clock_skew_flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_status: Option<TransportStatus>,
}

impl InvocationRecord {
    /// Attempts that were given an instance (ok or timeout).
    pub fn served_attempts(&self) -> impl Iterator<Item = &CloudLogEntry> {
        self.attempts.iter().filter(|a| a.status.was_served())
    }

    pub fn has_cloud_data(&self) -> bool {
        !self.attempts.is_empty()
    }

    /// Client send to final cloud end.
    pub fn end_to_end_ms(&self) -> Option<i64> {
        Some(self.cloud_end_ts? - self.send_ts?)
    }

    pub fn timeout_attempts(&self) -> usize {
        self.attempts.iter().filter(|a| a.status == AttemptStatus::Timeout).count()
    }

    pub fn throttle_attempts(&self) -> usize {
        self.attempts.iter().filter(|a| a.status == AttemptStatus::Throttled).count()
    }
}
