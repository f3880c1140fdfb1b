//! Per-run directories: `runs/<run-id>/` holding a manifest and JSONL logs.
//!
//! | file            | content                 |
//! |-----------------|-------------------------|
//! | `manifest.json` | [`RunManifest`]         |
//! | `local.jsonl`   | `LocalLogEntry` lines   |
//! | `cloud.jsonl`   | `CloudLogEntry` lines   |
//! | `records.jsonl` | joined records          |
//! | `egress.jsonl`  | egress ledger entries   |
//!
//! A run directory is created once; creating an existing id fails.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ingest_cloud_logs, read_jsonl, write_jsonl, Ingested, LogError, LogSource};
use crate::records::{InvocationRecord, LocalLogEntry};
use crate::sim::EgressEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub workload_name: String,
    pub provider_id: String,
    pub catalog_version: String,
    pub started_at: DateTime<Utc>,
    /// Snapshot of the workload or scenario that produced the run.
    pub spec: serde_json::Value,
    /// Catalog scheme for cost estimation; falls back to `provider_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pricing_scheme: Option<String>,
}

/// `<utc timestamp>-<workload>-<6 hex>`, unique in practice and sortable.
pub fn new_run_id(workload: &str, at: DateTime<Utc>) -> String {
    let slug: String = workload
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let tag: u32 = rand::thread_rng().gen_range(0..0x100_0000);
    format!("{}-{slug}-{tag:06x}", at.format("%Y%m%dT%H%M%S%.3fZ"))
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates `root/<run_id>/` and writes the manifest.
    pub fn create_run(&self, manifest: &RunManifest) -> Result<RunDir, LogError> {
        fs::create_dir_all(&self.root).map_err(LogError::io(&self.root))?;
        let path = self.root.join(&manifest.run_id);
        match fs::create_dir(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(LogError::RunExists(path))
            }
            Err(e) => return Err(LogError::Io { path, source: e }),
        }
        let dir = RunDir { path };
        let text = serde_json::to_string_pretty(manifest).map_err(|e| LogError::Invalid {
            path: dir.manifest_path(),
            reason: e.to_string(),
        })?;
        fs::write(dir.manifest_path(), text + "\n").map_err(LogError::io(dir.manifest_path()))?;
        Ok(dir)
    }

    /// Run directories under the root, sorted by name.
    pub fn list_runs(&self) -> Result<Vec<RunDir>, LogError> {
        let mut runs: Vec<RunDir> = fs::read_dir(&self.root)
            .map_err(LogError::io(&self.root))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join("manifest.json").is_file())
            .map(|path| RunDir { path })
            .collect();
        runs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(runs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LogError> {
        let dir = RunDir { path: path.into() };
        if !dir.manifest_path().is_file() {
            return Err(LogError::Invalid {
                path: dir.path.clone(),
                reason: "not a run directory (no manifest.json)".into(),
            });
        }
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path.join("manifest.json")
    }

    pub fn local_path(&self) -> PathBuf {
        self.path.join("local.jsonl")
    }

    pub fn cloud_path(&self) -> PathBuf {
        self.path.join("cloud.jsonl")
    }

    pub fn records_path(&self) -> PathBuf {
        self.path.join("records.jsonl")
    }

    pub fn egress_path(&self) -> PathBuf {
        self.path.join("egress.jsonl")
    }

    pub fn manifest(&self) -> Result<RunManifest, LogError> {
        let path = self.manifest_path();
        let text = fs::read_to_string(&path).map_err(LogError::io(&path))?;
        serde_json::from_str(&text).map_err(|e| LogError::Invalid { path, reason: e.to_string() })
    }

    pub fn append_local(&self, entries: &[LocalLogEntry]) -> Result<(), LogError> {
        write_jsonl(&self.local_path(), entries)
    }

    pub fn append_cloud(&self, entries: &[crate::records::CloudLogEntry]) -> Result<(), LogError> {
        write_jsonl(&self.cloud_path(), entries)
    }

    pub fn append_records(&self, records: &[InvocationRecord]) -> Result<(), LogError> {
        write_jsonl(&self.records_path(), records)
    }

    pub fn append_egress(&self, entries: &[EgressEntry]) -> Result<(), LogError> {
        write_jsonl(&self.egress_path(), entries)
    }

    /// Missing file reads as no entries (e.g. a run with no local side).
    pub fn local(&self) -> Result<Vec<LocalLogEntry>, LogError> {
        let p = self.local_path();
        if !p.exists() {
            return Ok(Vec::new());
        }
        read_jsonl(&p)
    }

    pub fn cloud(&self, provider_id: &str) -> Result<Ingested, LogError> {
        let p = self.cloud_path();
        if !p.exists() {
            return Ok(Ingested { provider_id: provider_id.to_string(), ..Ingested::default() });
        }
        ingest_cloud_logs(LogSource::Path(&p), provider_id, None)
    }

    pub fn egress(&self) -> Result<Vec<EgressEntry>, LogError> {
        let p = self.egress_path();
        if !p.exists() {
            return Ok(Vec::new());
        }
        read_jsonl(&p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(id: &str) -> RunManifest {
        RunManifest {
            run_id: id.into(),
            workload_name: "w".into(),
            provider_id: "sim-aws".into(),
            catalog_version: "v".into(),
            started_at: Utc::now(),
            spec: serde_json::json!({}),
            pricing_scheme: Some("aws-lambda-x86".into()),
        }
    }

    #[test]
    fn create_is_exclusive() {
        let tmp = tempfile::tempdir().unwrap();
        let store = RunStore::new(tmp.path());
        let dir = store.create_run(&manifest("r1")).unwrap();
        assert_eq!(dir.manifest().unwrap().run_id, "r1");
        assert!(matches!(store.create_run(&manifest("r1")), Err(LogError::RunExists(_))));
        assert_eq!(store.list_runs().unwrap().len(), 1);
    }

    #[test]
    fn run_ids_are_distinct() {
        let now = Utc::now();
        let ids: std::collections::HashSet<_> = (0..100).map(|_| new_run_id("img resize", now)).collect();
        assert_eq!(ids.len(), 100);
        assert!(ids.iter().all(|i| i.contains("img_resize")));
    }
}
