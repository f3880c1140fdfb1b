//! Operator commands behind the `multifaas` binary. Each command returns its
//! console text plus structured output so tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 internal failure, 2 configuration or usage
//! error, 3 provider unreachable, 4 unjoinable logs.

mod analyze;
pub mod config;
mod run;
mod simulate;

use std::path::Path;

use thiserror::Error;

use multifaas::client::ClientError;
use multifaas::cost::{load_catalog, Catalog};
use multifaas::fixtures::{image_processing_profiles, ml_training_profiles, write_fixture_run};
use multifaas::logs::{ingest_cloud_logs, write_jsonl, LogSource, RunStore, Translator};

pub use analyze::{cmd_analyze, AnalyzeOptions, AnalyzeOutput};
pub use run::{cmd_run, RunOutput};
pub use simulate::{cmd_simulate, SimulateOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Unreachable(String),
    #[error("{0}")]
    Unjoinable(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Unreachable(_) => 3,
            CliError::Unjoinable(_) => 4,
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Unreachable { .. } => CliError::Unreachable(e.to_string()),
            ClientError::InvalidArgument(_)
            | ClientError::UnknownAdapterKind(_)
            | ClientError::DuplicateProvider(_)
            | ClientError::NoAdapter(_)
            | ClientError::NoSuchBucket { .. }
            | ClientError::UnknownFunction { .. }
            | ClientError::Capability { .. }
            | ClientError::CrossProviderTrigger { .. }
            | ClientError::Credentials(_) => CliError::Config(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

pub(crate) fn load_catalog_or_bundled(path: Option<&Path>) -> Result<Catalog, CliError> {
    match path {
        Some(p) => load_catalog(p).map_err(|e| CliError::Config(format!("catalog {}: {e}", p.display()))),
        None => Ok(Catalog::bundled()),
    }
}

/// Normalises a provider log export into `out` (JSONL, appended).
pub fn cmd_ingest(
    source: &Path,
    provider_id: &str,
    translator: Option<&Path>,
    out: &Path,
) -> Result<String, CliError> {
    let translator = translator
        .map(Translator::load)
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ingested = ingest_cloud_logs(LogSource::Path(source), provider_id, translator.as_ref())
        .map_err(|e| CliError::Unjoinable(e.to_string()))?;
    write_jsonl(out, &ingested.entries).map_err(|e| CliError::Other(e.to_string()))?;
    let mut console = format!(
        "{} entries written to {}, {} corrupt lines skipped\n",
        ingested.entries.len(),
        out.display(),
        ingested.corrupt_count()
    );
    for (line, reason) in &ingested.corrupt {
        console.push_str(&format!("  line {line}: {reason}\n"));
    }
    Ok(console)
}

/// Writes the bundled image-processing and ML-training reference profiles
/// as run directories under `runs_dir`.
pub fn cmd_fixtures(runs_dir: &Path) -> Result<String, CliError> {
    let store = RunStore::new(runs_dir);
    let version = Catalog::bundled().catalog_version;
    let mut console = String::new();
    for p in image_processing_profiles().iter().chain(ml_training_profiles().iter()) {
        let dir = write_fixture_run(&store, p, &version).map_err(|e| CliError::Config(e.to_string()))?;
        console.push_str(&format!("{}\n", dir.path().display()));
    }
    Ok(console)
}
