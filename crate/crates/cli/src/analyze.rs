use std::fs;
use std::path::{Path, PathBuf};

use multifaas::analysis::{
    analyze, build_cdf, cdf_csv, default_late_serve_threshold_ms, rank_providers, ranking_text, report_json,
    text_table, AnalysisOptions, AnalysisReport, LatencyField, RankedProvider, Weights,
};
use multifaas::logs::{join_logs, RunDir};

use crate::{load_catalog_or_bundled, CliError};

/// Timeout assumed for runs whose manifest does not record one.
const FALLBACK_TIMEOUT_S: u64 = 20;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// The bundled catalog when `None`.
    pub catalog: Option<PathBuf>,
    pub extrapolate_to: Option<u64>,
    pub weights: Weights,
    /// Report files are only written when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { catalog: None, extrapolate_to: None, weights: Weights::EQUAL, out_dir: None }
    }
}

#[derive(Debug)]
pub struct AnalyzeOutput {
    pub reports: Vec<AnalysisReport>,
    /// Present when two or more runs were analysed.
    pub ranking: Option<Vec<RankedProvider>>,
    pub written: Vec<PathBuf>,
    pub console: String,
}

fn unjoinable(dir: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Unjoinable(format!("{}: {e}", dir.display()))
}

pub fn cmd_analyze(run_dirs: &[PathBuf], opts: &AnalyzeOptions) -> Result<AnalyzeOutput, CliError> {
    if run_dirs.is_empty() {
        return Err(CliError::Config("no run directories given".into()));
    }
    let catalog = load_catalog_or_bundled(opts.catalog.as_deref())?;
    let mut console = String::new();
    let mut reports = Vec::new();
    for path in run_dirs {
        let dir = RunDir::open(path).map_err(|e| CliError::Config(e.to_string()))?;
        let manifest = dir.manifest().map_err(|e| CliError::Config(e.to_string()))?;
        if manifest.catalog_version != catalog.catalog_version {
            console.push_str(&format!(
                "note: {} was recorded against catalog {}, pricing with {}\n",
                manifest.run_id, manifest.catalog_version, catalog.catalog_version
            ));
        }
        let scheme_id = manifest.pricing_scheme.as_deref().unwrap_or(&manifest.provider_id);
        let scheme = catalog.scheme(scheme_id).map_err(|e| CliError::Config(format!("{}: {e}", manifest.run_id)))?;
        let local = dir.local().map_err(|e| unjoinable(path, e))?;
        let cloud = dir.cloud(&manifest.provider_id).map_err(|e| unjoinable(path, e))?;
        if cloud.corrupt_count() > 0 {
            console.push_str(&format!(
                "note: {} corrupt cloud log lines skipped in {}\n",
                cloud.corrupt_count(),
                manifest.run_id
            ));
        }
        let records = join_logs(&cloud.entries, &local, &manifest.provider_id).map_err(|e| unjoinable(path, e))?;
        if !records.iter().any(|r| r.has_cloud_data()) {
            return Err(unjoinable(path, "no cloud log entries to join"));
        }
        let timeout_s = manifest.spec.get("timeout_s").and_then(|v| v.as_u64()).unwrap_or(FALLBACK_TIMEOUT_S);
        let report = analyze(
            &records,
            &AnalysisOptions {
                workload_name: &manifest.workload_name,
                scheme,
                extrapolate_to: opts.extrapolate_to,
                late_serve_threshold_ms: default_late_serve_threshold_ms(timeout_s),
            },
        )
        .map_err(|e| unjoinable(path, e))?;
        reports.push((report, records));
    }

    let ranking = if reports.len() >= 2 {
        let only: Vec<AnalysisReport> = reports.iter().map(|(r, _)| r.clone()).collect();
        Some(rank_providers(&only, opts.weights).map_err(|e| CliError::Config(e.to_string()))?)
    } else {
        None
    };
    let (reports, records): (Vec<_>, Vec<_>) = reports.into_iter().unzip();

    let table = text_table(&reports);
    console.push_str(&table);
    let ranking_section = ranking.as_ref().map(|r| {
        format!(
            "\nranking (performance {}, cost {})\n{}",
            opts.weights.performance,
            opts.weights.cost,
            ranking_text(r)
        )
    });
    if let Some(s) = &ranking_section {
        console.push_str(s);
    }

    let mut written = Vec::new();
    if let Some(out) = &opts.out_dir {
        let io = |p: &Path, e: std::io::Error| CliError::Other(format!("{}: {e}", p.display()));
        fs::create_dir_all(out).map_err(|e| io(out, e))?;
        let mut write = |name: String, body: String| -> Result<(), CliError> {
            let p = out.join(name);
            fs::write(&p, body).map_err(|e| io(&p, e))?;
            written.push(p);
            Ok(())
        };
        let doc = report_json(&reports, ranking.as_deref());
        write("report.json".into(), serde_json::to_string_pretty(&doc).expect("report serialises") + "\n")?;
        write("table.txt".into(), table.clone() + ranking_section.as_deref().unwrap_or(""))?;
        for (i, (r, recs)) in reports.iter().zip(&records).enumerate() {
            for field in [LatencyField::Billed, LatencyField::Serving] {
                if let Ok(cdf) = build_cdf(recs, field) {
                    write(format!("cdf-{i}-{}-{field}.csv", r.provider_id), cdf_csv(&cdf))?;
                }
            }
        }
        console.push_str(&format!("\nwrote {} files to {}\n", written.len(), out.display()));
    }
    Ok(AnalyzeOutput { reports, ranking, written, console })
}
