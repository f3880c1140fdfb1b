use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde_json::json;
use sha2::{Digest, Sha256};

use multifaas::analysis::{classify_tails, default_late_serve_threshold_ms, TailCounts};
use multifaas::cost::Catalog;
use multifaas::logs::{join_logs, new_run_id, LogError, RunManifest, RunStore};
use multifaas::sim::{run_scenario, Scenario, ScenarioSummary};

use crate::CliError;

#[derive(Debug)]
pub struct SimulateOutput {
    pub run_dir: PathBuf,
    pub summary: ScenarioSummary,
    /// Hex SHA-256 of the exported `cloud.jsonl`.
    pub cloud_sha256: String,
    pub tails: TailCounts,
    pub max_end_to_end_ms: Option<i64>,
    pub console: String,
}

/// Runs a scenario file on the virtual clock and writes the result as a run
/// directory under `runs_dir`. Log files depend only on the scenario and
/// seed; the manifest carries the wall-clock run id.
pub fn cmd_simulate(scenario_path: &Path, runs_dir: &Path, seed: Option<u64>) -> Result<SimulateOutput, CliError> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", scenario_path.display())))?;
    let mut scenario =
        Scenario::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", scenario_path.display())))?;
    if let Some(seed) = seed {
        scenario.simulator.rng_seed = seed;
    }
    let outcome = run_scenario(&scenario).map_err(|e| CliError::Other(e.to_string()))?;
    let records = join_logs(&outcome.cloud, &outcome.local, &scenario.provider_id)
        .map_err(|e| CliError::Unjoinable(e.to_string()))?;
    let timeout_s = scenario.function.timeout_s.unwrap_or(scenario.simulator.timeout_s);
    let tails = classify_tails(&records, default_late_serve_threshold_ms(timeout_s));
    let max_end_to_end_ms = records.iter().filter_map(|r| r.end_to_end_ms()).max();

    let started_at = Utc::now();
    let manifest = RunManifest {
        run_id: new_run_id(&scenario.name, started_at),
        workload_name: scenario.name.clone(),
        provider_id: scenario.provider_id.clone(),
        catalog_version: Catalog::bundled().catalog_version,
        started_at,
        spec: json!({ "scenario": scenario, "timeout_s": timeout_s }),
        pricing_scheme: scenario.simulator.egress_rate_model.clone(),
    };
    let err = |e: LogError| CliError::Other(e.to_string());
    let dir = RunStore::new(runs_dir).create_run(&manifest).map_err(err)?;
    dir.append_cloud(&outcome.cloud).map_err(err)?;
    dir.append_local(&outcome.local).map_err(err)?;
    dir.append_records(&records).map_err(err)?;
    let cloud_bytes = fs::read(dir.cloud_path()).map_err(|e| CliError::Other(e.to_string()))?;
    let cloud_sha256 = hex::encode(Sha256::digest(&cloud_bytes));

    let s = &outcome.summary;
    let console = format!(
        "scenario {} (seed {})\n  submitted {}, ok {}, timed out {}, throttled {}\n  \
         throttle events {}, timeout events {}, cold starts {}\n  \
         tail scenario a {}, scenario b {} (threshold {} ms), max end-to-end {} ms\n  \
         cloud.jsonl sha256 {}\n  run {}\n",
        scenario.name,
        scenario.simulator.rng_seed,
        s.submitted,
        s.ok,
        s.timeout_exhausted,
        s.throttle_exhausted,
        s.throttle_events,
        s.timeout_events,
        s.cold_starts,
        tails.scenario_a,
        tails.scenario_b,
        tails.threshold_ms,
        max_end_to_end_ms.map_or("-".into(), |v| v.to_string()),
        cloud_sha256,
        dir.path().display(),
    );
    Ok(SimulateOutput {
        run_dir: dir.path().to_path_buf(),
        summary: outcome.summary,
        cloud_sha256,
        tails,
        max_end_to_end_ms,
        console,
    })
}
