//! Operator configuration: catalog and credentials locations, providers and
//! named workloads. Relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use multifaas::client::{AdapterKind, ClockMode, InvocationMode, SimFunctionSpec};
use multifaas::sim::SimulatorConfig;

use crate::CliError;

/// Overrides the `credentials` path from the config file.
pub const CREDENTIALS_ENV: &str = "MULTIFAAS_CREDENTIALS";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Pricing catalog; the bundled one when absent.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// INI file of credential sections, keyed by `credentials_ref`.
    #[serde(default)]
    pub credentials: Option<PathBuf>,
    #[serde(default = "default_runs_dir")]
    pub runs_dir: PathBuf,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub workloads: Vec<WorkloadConfig>,
}

fn default_runs_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub id: String,
    pub adapter: AdapterKind,
    /// Catalog scheme used when analysing runs on this provider.
    #[serde(default)]
    pub pricing_scheme: Option<String>,
    /// Required for http adapters; simulated providers use `sim://<id>`.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub credentials_ref: Option<String>,
    /// Keys merged over the simulator defaults.
    #[serde(default)]
    pub simulator: Option<toml::Table>,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default = "yes")]
    pub object_storage: bool,
    #[serde(default = "yes")]
    pub functions: bool,
    #[serde(default)]
    pub buckets: Vec<String>,
    #[serde(default)]
    pub deploy: Vec<SimFunctionSpec>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub name: String,
    /// Default provider; `--provider` overrides.
    #[serde(default)]
    pub provider: Option<String>,
    pub function: String,
    #[serde(default = "http")]
    pub trigger: String,
    /// Bucket on the function's provider that storage events come from.
    #[serde(default)]
    pub bucket: Option<String>,
    /// Pipeline-disabled wiring: stage each payload here and pass its locator.
    #[serde(default)]
    pub foreign_storage: Option<ForeignStorage>,
    pub total_requests: usize,
    pub burst_size: usize,
    #[serde(default)]
    pub inter_burst_ms: u64,
    #[serde(default)]
    pub payload_bytes: u64,
    #[serde(default = "sync")]
    pub mode: InvocationMode,
    #[serde(default = "skew_budget")]
    pub skew_budget_ms: u64,
}

fn http() -> String {
    "http".into()
}

fn sync() -> InvocationMode {
    InvocationMode::Sync
}

fn skew_budget() -> u64 {
    multifaas::driver::DEFAULT_SKEW_BUDGET_MS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForeignStorage {
    pub provider: String,
    pub bucket: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        cfg.catalog = cfg.catalog.as_ref().map(resolve);
        cfg.credentials = cfg.credentials.as_ref().map(resolve);
        cfg.runs_dir = resolve(&cfg.runs_dir);
        if let Some(env) = std::env::var_os(CREDENTIALS_ENV) {
            cfg.credentials = Some(PathBuf::from(env));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let mut ids: Vec<&str> = self.providers.iter().map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("provider {:?} is defined twice", w[0])));
        }
        for p in &self.providers {
            if p.adapter == AdapterKind::S3CompatibleHttp && p.endpoint.is_none() {
                return Err(CliError::Config(format!("provider {:?} needs an endpoint", p.id)));
            }
            p.simulator_config()?;
        }
        for w in &self.workloads {
            if !["http", "storage-event"].contains(&w.trigger.as_str()) {
                return Err(CliError::Config(format!(
                    "workload {:?}: trigger must be http or storage-event, not {:?}",
                    w.name, w.trigger
                )));
            }
        }
        Ok(())
    }

    pub fn provider(&self, id: &str) -> Result<&ProviderConfig, CliError> {
        self.providers.iter().find(|p| p.id == id).ok_or_else(|| {
            CliError::Config(format!("unknown provider {id:?}; known providers: {}", self.provider_names()))
        })
    }

    pub fn workload(&self, name: &str) -> Result<&WorkloadConfig, CliError> {
        self.workloads.iter().find(|w| w.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.workloads.iter().map(|w| w.name.as_str()).collect();
            CliError::Config(format!("unknown workload {name:?}; known workloads: {}", known.join(", ")))
        })
    }

    fn provider_names(&self) -> String {
        self.providers.iter().map(|p| p.id.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl ProviderConfig {
    pub fn simulator_config(&self) -> Result<SimulatorConfig, CliError> {
        let Some(overrides) = &self.simulator else {
            return Ok(SimulatorConfig::default());
        };
        let mut merged = toml::Table::try_from(SimulatorConfig::default())
            .map_err(|e| CliError::Other(e.to_string()))?;
        merged.extend(overrides.clone());
        let cfg: SimulatorConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| CliError::Config(format!("provider {:?} simulator: {e}", self.id)))?;
        cfg.validate().map_err(|e| CliError::Config(format!("provider {:?}: {e}", self.id)))?;
        Ok(cfg)
    }

    pub fn pricing_scheme(&self) -> &str {
        self.pricing_scheme.as_deref().unwrap_or(&self.id)
    }
}
