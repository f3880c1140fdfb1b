//! Cloud log ingestion, normalisation and the local/cloud join.

mod ingest;
mod join;
mod store;
mod translate;

use std::path::PathBuf;

use thiserror::Error;

pub use ingest::{
    dedup_entries, ingest_cloud_logs, read_jsonl, write_jsonl, Ingested, LogSource,
    CLOUD_LOG_SCHEMA_VERSION,
};
pub use join::{estimate_clock_skew, join_logs, SkewEstimate};
pub use store::{new_run_id, RunDir, RunManifest, RunStore};
pub use translate::Translator;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{source_name} is unreadable: {reason}")]
    Unreadable { source_name: String, reason: String },
    #[error("{source_name}: schema version {found} is not supported (expected {expected})")]
    SchemaVersion { source_name: String, found: u64, expected: u64 },
    #[error("translator: {0}")]
    Translator(String),
    #[error("request {request_id} has more than one cloud entry for attempt {attempt}")]
    DuplicateAttempt { request_id: String, attempt: u32 },
    #[error("request {0} appears more than once in the local log")]
    DuplicateLocal(String),
    #[error("run directory {0} already exists")]
    RunExists(PathBuf),
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
}

impl LogError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LogError {
        let path = path.into();
        move |source| LogError::Io { path, source }
    }
}
