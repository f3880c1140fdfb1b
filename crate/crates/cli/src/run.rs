use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use serde_json::json;

use multifaas::client::{
    AdapterKind, BucketRef, CredentialStore, IniCredentialStore, ProviderRef, Registry, RegistryBuilder,
    SimProviderSpec, SimWorld, SimulatedProvider, TriggerBinding,
};
use multifaas::driver::{run_workload_detailed, DriverError, PayloadTemplate, Target, Trigger, WorkloadSpec};
use multifaas::logs::{ingest_cloud_logs, join_logs, new_run_id, LogSource, RunManifest, RunStore};
use multifaas::sim::SimSummary;

use crate::config::{Config, WorkloadConfig};
use crate::{load_catalog_or_bundled, CliError};

#[derive(Debug)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub local_entries: usize,
    pub cloud_entries: usize,
    pub records: usize,
    pub egress_entries: usize,
    pub summary: SimSummary,
    pub console: String,
}

struct Built {
    registry: Registry,
    sims: BTreeMap<String, Arc<SimulatedProvider>>,
}

fn build_registry(cfg: &Config) -> Result<Built, CliError> {
    let catalog = load_catalog_or_bundled(cfg.catalog.as_deref())?;
    let store: Arc<dyn CredentialStore> = match &cfg.credentials {
        Some(path) => Arc::new(
            IniCredentialStore::from_path(path)
                .map_err(|e| CliError::Config(format!("credentials {}: {e}", path.display())))?,
        ),
        None => Arc::new(IniCredentialStore::default()),
    };
    let mut b = RegistryBuilder::new().with_world(SimWorld::new(catalog)).with_credentials(store);
    let mut sims = BTreeMap::new();
    for p in &cfg.providers {
        match p.adapter {
            AdapterKind::Simulated => {
                let spec = SimProviderSpec {
                    simulator: p.simulator_config()?,
                    object_storage: p.object_storage,
                    functions: p.functions,
                    clock: p.clock,
                    buckets: p.buckets.clone(),
                    deployed: p.deploy.clone(),
                };
                let sim = b.register_simulated(ProviderRef::simulated(&p.id), spec)?;
                sims.insert(p.id.clone(), sim);
            }
            AdapterKind::S3CompatibleHttp => {
                let endpoint = p.endpoint.as_deref().unwrap_or_default();
                let region = p.region.as_deref().unwrap_or("us-east-1");
                let cref = p.credentials_ref.as_deref().unwrap_or(&p.id);
                b.register_adapter(ProviderRef::new(&p.id, endpoint, region, cref)?, p.adapter)?;
            }
        }
    }
    Ok(Built { registry: b.build(), sims })
}

fn provider_ref(reg: &Registry, id: &str) -> Result<ProviderRef, CliError> {
    Ok(reg.adapter(id)?.provider().clone())
}

fn workload_spec(w: &WorkloadConfig, provider_id: &str, built: &Built) -> Result<WorkloadSpec, CliError> {
    let reg = &built.registry;
    if !reg.capabilities(provider_id)?.functions {
        return Err(CliError::Config(format!("provider {provider_id:?} cannot run functions")));
    }
    let sim = built.sims.get(provider_id).ok_or_else(|| {
        CliError::Config(format!("provider {provider_id:?} has no log export; only simulated providers can be driven"))
    })?;
    let function = sim.function_ref(&w.function)?;
    let (trigger, target, payload_template) = match w.trigger.as_str() {
        "storage-event" => {
            let bucket = w.bucket.as_deref().ok_or_else(|| {
                CliError::Config(format!("workload {:?}: storage-event trigger needs a bucket", w.name))
            })?;
            let bucket = BucketRef::new(provider_ref(reg, provider_id)?, bucket)?;
            reg.bind_trigger(&TriggerBinding::object_created(bucket.clone(), function.clone()))?;
            (
                Trigger::StorageEvent,
                Target::Binding { bucket, function },
                PayloadTemplate::Synthetic { size_bytes: w.payload_bytes },
            )
        }
        _ => {
            let payload = match &w.foreign_storage {
                Some(fs) => PayloadTemplate::ForeignObject {
                    storage: BucketRef::new(provider_ref(reg, &fs.provider)?, &fs.bucket)?,
                    size_bytes: w.payload_bytes,
                },
                None if w.payload_bytes > 0 => PayloadTemplate::Synthetic { size_bytes: w.payload_bytes },
                None => PayloadTemplate::Inline { bytes: b"{}".to_vec() },
            };
            (Trigger::Http, Target::Function(function), payload)
        }
    };
    Ok(WorkloadSpec {
        name: w.name.clone(),
        trigger,
        target,
        total_requests: w.total_requests,
        burst_size: w.burst_size,
        inter_burst_ms: w.inter_burst_ms,
        payload_template,
        record_local_log: true,
        mode: w.mode,
        skew_budget_ms: w.skew_budget_ms,
    })
}

/// Drives `workload` against its provider and records the run under the
/// configured runs directory.
pub fn cmd_run(config_path: &Path, workload: &str, provider: Option<&str>) -> Result<RunOutput, CliError> {
    let cfg = Config::load(config_path)?;
    let w = cfg.workload(workload)?;
    let provider_id = provider.or(w.provider.as_deref()).ok_or_else(|| {
        CliError::Config(format!("workload {:?} names no provider; pass --provider", w.name))
    })?;
    let pcfg = cfg.provider(provider_id)?;
    let built = build_registry(&cfg)?;
    built.registry.probe(provider_id)?;
    if let Some(fs) = &w.foreign_storage {
        cfg.provider(&fs.provider)?;
        built.registry.probe(&fs.provider)?;
    }

    let spec = workload_spec(w, provider_id, &built)?;
    let started_at = Utc::now();
    let run = run_workload_detailed(&spec, &built.registry).map_err(|e| match e {
        DriverError::Invalid { .. } => CliError::Config(e.to_string()),
        DriverError::Client(c) => c.into(),
    })?;
    let sim = &built.sims[provider_id];
    let cloud = ingest_cloud_logs(LogSource::Simulator(sim), provider_id, None)
        .map_err(|e| CliError::Other(e.to_string()))?
        .entries;
    let records = join_logs(&cloud, &run.entries, provider_id).map_err(|e| CliError::Unjoinable(e.to_string()))?;
    let world = built.registry.world().expect("simulated provider registered");
    let egress = world.ledger().entries();
    let summary = sim.summary();

    let function = spec.target.function();
    let manifest = RunManifest {
        run_id: new_run_id(&w.name, started_at),
        workload_name: w.name.clone(),
        provider_id: provider_id.to_string(),
        catalog_version: world.catalog().catalog_version.clone(),
        started_at,
        spec: json!({
            "workload": w,
            "memory_mb": function.memory_mb,
            "timeout_s": function.timeout_s,
            "bursts": run.bursts,
        }),
        pricing_scheme: Some(pcfg.pricing_scheme().to_string()),
    };
    let err = |e: multifaas::logs::LogError| CliError::Other(e.to_string());
    let dir = RunStore::new(&cfg.runs_dir).create_run(&manifest).map_err(err)?;
    dir.append_local(&run.entries).map_err(err)?;
    dir.append_cloud(&cloud).map_err(err)?;
    dir.append_records(&records).map_err(err)?;
    dir.append_egress(&egress).map_err(err)?;

    let late = run.bursts.iter().filter(|b| !b.within_budget).count();
    let mut console = format!(
        "run {}\n  {} local entries, {} cloud entries, {} records, {} egress entries\n  \
         ok {}, timed out {}, throttled {}, cold starts {}\n",
        dir.path().display(),
        run.entries.len(),
        cloud.len(),
        records.len(),
        egress.len(),
        summary.ok,
        summary.timeout_exhausted,
        summary.throttle_exhausted,
        summary.cold_starts,
    );
    if late > 0 {
        console.push_str(&format!("  warning: {late} bursts exceeded the {} ms send-skew budget\n", spec.skew_budget_ms));
    }
    Ok(RunOutput {
        run_dir: dir.path().to_path_buf(),
        local_entries: run.entries.len(),
        cloud_entries: cloud.len(),
        records: records.len(),
        egress_entries: egress.len(),
        summary,
        console,
    })
}
