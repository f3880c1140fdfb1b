use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{LogError, Translator};
use crate::client::SimulatedProvider;
use crate::records::CloudLogEntry;

/// Version accepted in an optional `{"schema_version": N}` first line.
pub const CLOUD_LOG_SCHEMA_VERSION: u64 = 1;

pub enum LogSource<'a> {
    Path(&'a Path),
    Simulator(&'a SimulatedProvider),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub provider_id: String,
    pub entries: Vec<CloudLogEntry>,
    /// Lines that did not parse, with 1-based line numbers and reasons.
    pub corrupt: Vec<(usize, String)>,
}

impl Ingested {
    pub fn corrupt_count(&self) -> usize {
        self.corrupt.len()
    }
}

/// Loads cloud log entries in the normalised schema, or through
/// `translator` for provider-native exports.
///
/// Lines that fail to parse are counted in [`Ingested::corrupt`]. A source is
/// rejected outright when it cannot be read or when no line parses.
pub fn ingest_cloud_logs(
    source: LogSource<'_>,
    provider_id: &str,
    translator: Option<&Translator>,
) -> Result<Ingested, LogError> {
    let (name, text) = match source {
        LogSource::Simulator(sim) => {
            let entries = sim.export_logs().map_err(|e| LogError::Unreadable {
                source_name: format!("simulator {}", sim_name(sim)),
                reason: e.to_string(),
            })?;
            return Ok(Ingested { provider_id: provider_id.to_string(), entries, corrupt: Vec::new() });
        }
        LogSource::Path(p) => {
            let bytes = fs::read(p).map_err(|e| LogError::Unreadable {
                source_name: p.display().to_string(),
                reason: e.to_string(),
            })?;
            (p.display().to_string(), String::from_utf8_lossy(&bytes).into_owned())
        }
    };
    let mut ingested = parse_cloud_log_text(&name, &text, translator)?;
    ingested.provider_id = provider_id.to_string();
    Ok(ingested)
}

fn sim_name(sim: &SimulatedProvider) -> String {
    use crate::client::Adapter;
    sim.provider().provider_id.clone()
}

pub(crate) fn parse_cloud_log_text(
    name: &str,
    text: &str,
    translator: Option<&Translator>,
) -> Result<Ingested, LogError> {
    let mut out = Ingested::default();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    if let Some((_, first)) = lines.peek() {
        if let Ok(Value::Object(header)) = serde_json::from_str::<Value>(first) {
            if let Some(v) = header.get("schema_version") {
                let found = v.as_u64().unwrap_or(0);
                if found != CLOUD_LOG_SCHEMA_VERSION {
                    return Err(LogError::SchemaVersion {
                        source_name: name.to_string(),
                        found,
                        expected: CLOUD_LOG_SCHEMA_VERSION,
                    });
                }
                lines.next();
            }
        }
    }
    let mut total = 0usize;
    for (idx, line) in lines {
        total += 1;
        let parsed = match translator {
            Some(t) => serde_json::from_str::<Value>(line)
                .map_err(|e| e.to_string())
                .and_then(|v| t.translate(&v)),
            None => serde_json::from_str::<CloudLogEntry>(line).map_err(|e| e.to_string()),
        };
        match parsed.and_then(|e| check_entry(&e).map(|()| e)) {
            Ok(e) => out.entries.push(e),
            Err(reason) => out.corrupt.push((idx + 1, reason)),
        }
    }
    if total > 0 && out.entries.is_empty() {
        return Err(LogError::Unreadable {
            source_name: name.to_string(),
            reason: format!("none of {total} lines parsed; first error: {}", out.corrupt[0].1),
        });
    }
    Ok(out)
}

fn check_entry(e: &CloudLogEntry) -> Result<(), String> {
    if e.end_ts < e.start_ts {
        return Err(format!("end_ts {} precedes start_ts {}", e.end_ts, e.start_ts));
    }
    if e.request_id.as_str().is_empty() {
        return Err("empty request_id".into());
    }
    Ok(())
}

/// Drops repeated (request_id, attempt) entries, keeping the first.
pub fn dedup_entries(entries: Vec<CloudLogEntry>) -> Vec<CloudLogEntry> {
    let mut seen = HashSet::new();
    entries
        .into_iter()
        .filter(|e| seen.insert((e.request_id.clone(), e.attempt)))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), LogError> {
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(LogError::io(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| LogError::Invalid {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(LogError::io(path))?;
    }
    w.flush().map_err(LogError::io(path))
}

/// Reads a JSONL file strictly: any bad line is an error.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, LogError> {
    let text = fs::read_to_string(path).map_err(LogError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Invalid {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::AttemptStatus;

    fn line(id: &str, attempt: u32) -> String {
        format!(
            r#"{{"request_id":"{id}","function_name":"f","start_ts":0,"end_ts":10,"billed_duration_ms":10,"memory_mb":1024,"max_memory_used_mb":100,"cold_start":false,"status":"ok","attempt":{attempt}}}"#
        )
    }

    #[test]
    fn corrupt_lines_counted() {
        let mut lines: Vec<String> = (0..98).map(|i| line(&format!("r{i}"), 1)).collect();
        lines.insert(10, "{not json".into());
        lines.insert(50, r#"{"request_id":"x"}"#.into());
        let got = parse_cloud_log_text("t", &lines.join("\n"), None).unwrap();
        assert_eq!(got.entries.len(), 98);
        assert_eq!(got.corrupt_count(), 2);
        assert_eq!(got.corrupt[0].0, 11);
        assert_eq!(got.entries[0].status, AttemptStatus::Ok);
    }

    #[test]
    fn wholly_corrupt_source_rejected() {
        assert!(matches!(
            parse_cloud_log_text("t", "garbage\nmore garbage\n", None),
            Err(LogError::Unreadable { .. })
        ));
        assert!(parse_cloud_log_text("t", "", None).unwrap().entries.is_empty());
    }

    #[test]
    fn schema_header() {
        let ok = format!("{{\"schema_version\":1}}\n{}", line("a", 1));
        assert_eq!(parse_cloud_log_text("t", &ok, None).unwrap().entries.len(), 1);
        let bad = format!("{{\"schema_version\":2}}\n{}", line("a", 1));
        assert!(matches!(
            parse_cloud_log_text("t", &bad, None),
            Err(LogError::SchemaVersion { found: 2, .. })
        ));
    }

    #[test]
    fn end_before_start_is_corrupt() {
        let text = format!("{}\n{}", line("a", 1), line("b", 1).replace("\"end_ts\":10", "\"end_ts\":-1"));
        let got = parse_cloud_log_text("t", &text, None).unwrap();
        assert_eq!((got.entries.len(), got.corrupt_count()), (1, 1));
    }

    #[test]
    fn dedup_keeps_first_per_attempt() {
        let text = [line("a", 1), line("a", 2), line("a", 1)].join("\n");
        let got = parse_cloud_log_text("t", &text, None).unwrap();
        assert_eq!(dedup_entries(got.entries).len(), 2);
    }
}
