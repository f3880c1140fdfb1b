//! Provider-native log exports to [`CloudLogEntry`], driven by a mapping file.
//!
//! ```toml
//! format = "cloudwatch-report-json"
//!
//! [fields]                       # schema field = native path (dots descend)
//! request_id = "requestId"
//! start_ts = "time.start"
//!
//! [conversions]                  # optional per schema field
//! start_ts = "rfc3339"           # rfc3339 | seconds-to-ms | present
//!
//! [status_values]                # native status = schema status
//! SUCCESS = "ok"
//!
//! [defaults]                     # used when the native path is absent
//! attempt = 1
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use chrono::DateTime;
use serde::Deserialize;
use serde_json::{Map, Value};

use super::LogError;
use crate::records::CloudLogEntry;

const SCHEMA_FIELDS: &[&str] = &[
    "request_id",
    "function_name",
    "start_ts",
    "end_ts",
    "billed_duration_ms",
    "memory_mb",
    "max_memory_used_mb",
    "cold_start",
    "status",
    "attempt",
    "egress_bytes",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Conversion {
    Rfc3339,
    SecondsToMs,
    /// true iff the native path exists and is not null.
    Present,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Translator {
    pub format: String,
    fields: BTreeMap<String, String>,
    #[serde(default)]
    conversions: BTreeMap<String, Conversion>,
    #[serde(default)]
    status_values: BTreeMap<String, String>,
    #[serde(default)]
    defaults: BTreeMap<String, toml::Value>,
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, seg| cur.get(seg))
}

fn toml_to_json(v: &toml::Value) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Translator {
    pub fn from_toml_str(text: &str) -> Result<Self, LogError> {
        let t: Translator = toml::from_str(text).map_err(|e| LogError::Translator(e.to_string()))?;
        for key in t.fields.keys().chain(t.conversions.keys()).chain(t.defaults.keys()) {
            if !SCHEMA_FIELDS.contains(&key.as_str()) {
                return Err(LogError::Translator(format!(
                    "{key:?} is not a cloud log field (known: {})",
                    SCHEMA_FIELDS.join(", ")
                )));
            }
        }
        for v in t.status_values.values() {
            if !["ok", "timeout", "throttled"].contains(&v.as_str()) {
                return Err(LogError::Translator(format!("status value {v:?} is not a schema status")));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        let text = std::fs::read_to_string(path).map_err(LogError::io(path))?;
        Self::from_toml_str(&text)
    }

    /// Maps one native record; the error string names the failing field.
    pub fn translate(&self, native: &Value) -> Result<CloudLogEntry, String> {
        let mut out = Map::new();
        for field in SCHEMA_FIELDS {
            let conversion = self.conversions.get(*field).copied();
            let raw = self.fields.get(*field).and_then(|p| lookup(native, p)).filter(|v| !v.is_null());
            let value = match (conversion, raw) {
                (Some(Conversion::Present), raw) if self.fields.contains_key(*field) => {
                    Some(Value::Bool(raw.is_some()))
                }
                (_, Some(v)) => Some(self.convert(field, conversion, v)?),
                (_, None) => self.defaults.get(*field).map(toml_to_json),
            };
            if let Some(v) = value {
                out.insert(field.to_string(), v);
            }
        }
        serde_json::from_value(Value::Object(out)).map_err(|e| e.to_string())
    }

    fn convert(&self, field: &str, conversion: Option<Conversion>, v: &Value) -> Result<Value, String> {
        let v = match conversion {
            None | Some(Conversion::Present) => v.clone(),
            Some(Conversion::Rfc3339) => {
                let s = v.as_str().ok_or_else(|| format!("{field}: expected a timestamp string"))?;
                let t = DateTime::parse_from_rfc3339(s).map_err(|e| format!("{field}: {e}"))?;
                Value::from(t.timestamp_millis())
            }
            Some(Conversion::SecondsToMs) => {
                let secs = v.as_f64().ok_or_else(|| format!("{field}: expected seconds"))?;
                Value::from((secs * 1000.0).round() as i64)
            }
        };
        if field == "status" {
            let native = v.as_str().ok_or_else(|| "status: expected a string".to_string())?;
            let mapped = self
                .status_values
                .get(native)
                .cloned()
                .unwrap_or_else(|| native.to_ascii_lowercase());
            return Ok(Value::String(mapped));
        }
        Ok(v)
    }
}
