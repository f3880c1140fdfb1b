//! Command behaviour: run directories, exit codes, analysis outputs and
//! simulation exports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use multifaas::analysis::Weights;
use multifaas::logs::RunDir;
use multifaas_cli::{cmd_analyze, cmd_fixtures, cmd_ingest, cmd_run, cmd_simulate, AnalyzeOptions, CliError};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The bundled config, rewritten to keep runs inside `dir`.
fn config_in(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(root().join("config/multifaas.toml")).unwrap();
    let catalog = root().join("catalog/default-pricing.toml");
    let text = text
        .replace("runs_dir = \"../runs\"", &format!("runs_dir = {:?}", dir.join("runs")))
        .replace("catalog = \"../catalog/default-pricing.toml\"", &format!("catalog = {catalog:?}"));
    let path = dir.join("multifaas.toml");
    fs::write(&path, text).unwrap();
    path
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multifaas"))
}

#[test]
fn run_writes_a_complete_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd_run(&config_in(tmp.path()), "image-resize-sim", None).unwrap();
    assert_eq!(out.local_entries, 50);
    assert!(out.cloud_entries >= 50);
    let dir = RunDir::open(&out.run_dir).unwrap();
    let m = dir.manifest().unwrap();
    assert_eq!((m.workload_name.as_str(), m.provider_id.as_str()), ("image-resize-sim", "sim-aws"));
    assert_eq!(m.pricing_scheme.as_deref(), Some("aws-lambda-x86"));
    assert_eq!(m.spec["timeout_s"], 20);
    assert_eq!(dir.local().unwrap().len(), 50);
    assert_eq!(dir.cloud("sim-aws").unwrap().entries.len(), out.cloud_entries);
}

#[test]
fn rerun_gets_a_fresh_run_id() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let a = cmd_run(&cfg, "image-resize-sim", None).unwrap();
    let before = fs::read(a.run_dir.join("cloud.jsonl")).unwrap();
    let b = cmd_run(&cfg, "image-resize-sim", None).unwrap();
    assert_ne!(a.run_dir, b.run_dir);
    assert_eq!(fs::read(a.run_dir.join("cloud.jsonl")).unwrap(), before);
}

#[test]
fn pipeline_disabled_run_fills_the_egress_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let out = cmd_run(&cfg, "image-resize-pipeline-disabled", None).unwrap();
    let egress = RunDir::open(&out.run_dir).unwrap().egress().unwrap();
    assert_eq!(egress.len(), 10);
    assert!(egress.iter().all(|e| e.src_provider == "sim-gcf" && e.billable_bytes == 5_000_000 && e.fee.micros() > 0));

    let out = cmd_run(&cfg, "image-resize-zero-egress-storage", None).unwrap();
    let egress = RunDir::open(&out.run_dir).unwrap().egress().unwrap();
    assert!(!egress.is_empty());
    assert!(egress.iter().all(|e| e.billable_bytes == 5_000_000 && e.fee.micros() == 0));
}

#[test]
fn storage_event_workload_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd_run(&config_in(tmp.path()), "image-resize-storage-event", None).unwrap();
    assert_eq!((out.local_entries, out.cloud_entries, out.records), (50, 50, 50));
}

#[test]
fn unknown_workload_lists_known_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let err = cmd_run(&config_in(tmp.path()), "nope", None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("image-resize-sim") && msg.contains("image-resize-pipeline-disabled"), "{msg}");
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    for text in [
        "providers = 3",
        "[[providers]]\nid = \"a\"\nadapter = \"ftp\"\n",
        "[[providers]]\nid = \"a\"\nadapter = \"simulated\"\n[providers.simulator]\nconcurrency_limit = 0\n",
        "[[providers]]\nid = \"a\"\nadapter = \"simulated\"\n[[providers]]\nid = \"a\"\nadapter = \"simulated\"\n",
        "[[providers]]\nid = \"a\"\nadapter = \"s3-compatible-http\"\n",
        "mystery = 1",
    ] {
        fs::write(&bad, text).unwrap();
        let err = cmd_run(&bad, "w", None).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{text:?} gave {err:?}");
    }
    assert_eq!(cmd_run(&tmp.path().join("missing.toml"), "w", None).unwrap_err().exit_code(), 2);
}

#[test]
fn cross_provider_storage_trigger_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str(
        "\n[[workloads]]\nname = \"bad-trigger\"\nprovider = \"sim-gcf\"\nfunction = \"image-resize\"\n\
         trigger = \"storage-event\"\nbucket = \"missing\"\ntotal_requests = 1\nburst_size = 1\npayload_bytes = 10\n",
    );
    fs::write(&cfg, text).unwrap();
    assert_eq!(cmd_run(&cfg, "bad-trigger", None).unwrap_err().exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let status = |args: &[&str]| bin().args(args).output().unwrap();

    let out = status(&["run", "image-resize-sim", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = status(&["run", "nope", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("known workloads"));

    let out = status(&["run", "image-resize-sim", "--provider", "local-minio", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let broken = tmp.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("manifest.json"), r#"{"run_id":"x","workload_name":"w","provider_id":"sim-aws","catalog_version":"v","started_at":"2022-11-01T00:00:00Z","spec":{},"pricing_scheme":"aws-lambda-x86"}"#).unwrap();
    fs::write(broken.join("cloud.jsonl"), "not json\n").unwrap();
    let out = status(&["analyze", broken.to_str().unwrap(), "--out-dir", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let out = status(&["analyze", "x", "--weights", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = status(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(help.contains("Exit codes"), "{help}");
}

#[test]
fn credentials_path_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_in(tmp.path());
    let out = bin()
        .args(["run", "image-resize-sim", "--config", cfg.to_str().unwrap()])
        .env("MULTIFAAS_CREDENTIALS", tmp.path().join("absent.ini"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.ini"));
}

#[test]
fn single_run_has_no_ranking_section() {
    let tmp = tempfile::tempdir().unwrap();
    let run = cmd_run(&config_in(tmp.path()), "image-resize-sim", None).unwrap();
    let out_dir = tmp.path().join("report");
    let opts = AnalyzeOptions { out_dir: Some(out_dir.clone()), ..AnalyzeOptions::default() };
    let out = cmd_analyze(&[run.run_dir], &opts).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert!(out.ranking.is_none());
    assert!(!out.console.contains("ranking"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(doc["ranking"].is_null());
    assert!(out_dir.join("cdf-0-sim-aws-billed.csv").is_file());
}

fn fixture_dirs(runs: &Path, workload: &str) -> Vec<PathBuf> {
    ["sim-aws", "sim-gcf", "sim-alibaba"].iter().map(|p| runs.join(format!("fixture-{workload}-{p}"))).collect()
}

#[test]
fn fixture_runs_rank_and_agree_with_written_files() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_fixtures(tmp.path()).unwrap();
    assert!(cmd_fixtures(tmp.path()).is_err(), "fixture runs are never overwritten");
    let out_dir = tmp.path().join("report");
    let opts = AnalyzeOptions {
        extrapolate_to: Some(1_000_000),
        out_dir: Some(out_dir.clone()),
        ..AnalyzeOptions::default()
    };
    let out = cmd_analyze(&fixture_dirs(tmp.path(), "image-processing"), &opts).unwrap();
    let ranking = out.ranking.as_ref().unwrap();
    assert_eq!(ranking[0].provider_id, "sim-aws");
    assert!(out.console.contains("1M req. Cost"));

    let table = fs::read_to_string(out_dir.join("table.txt")).unwrap();
    assert!(out.console.contains(&table));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    for (i, r) in out.reports.iter().enumerate() {
        let display = doc["reports"][i]["cost"]["no_free_tier"]["total"]["display"].as_str().unwrap();
        assert_eq!(display, r.cost.no_free_tier.total.display_cents());
        assert!(table.contains(display));
    }
    assert_eq!(doc["ranking"][0]["provider_id"], "sim-aws");

    let cost = AnalyzeOptions { extrapolate_to: Some(1_000_000), weights: "0,1".parse().unwrap(), ..AnalyzeOptions::default() };
    let order: Vec<String> = cmd_analyze(&fixture_dirs(tmp.path(), "image-processing"), &cost)
        .unwrap()
        .ranking
        .unwrap()
        .into_iter()
        .map(|r| r.provider_id)
        .collect();
    assert_eq!(order, ["sim-alibaba", "sim-aws", "sim-gcf"]);
}

#[test]
fn analyze_rejects_mixed_workloads_and_bad_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_fixtures(tmp.path()).unwrap();
    let mixed = vec![
        tmp.path().join("fixture-image-processing-sim-aws"),
        tmp.path().join("fixture-ml-training-sim-gcf"),
    ];
    let err = cmd_analyze(&mixed, &AnalyzeOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    let err = cmd_analyze(&[tmp.path().join("nothing")], &AnalyzeOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = cmd_analyze(&[], &AnalyzeOptions::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let weights = AnalyzeOptions { weights: Weights::PERFORMANCE_ONLY, ..AnalyzeOptions::default() };
    let out = cmd_analyze(&fixture_dirs(tmp.path(), "image-processing"), &weights).unwrap();
    let order: Vec<&str> = out.ranking.as_ref().unwrap().iter().map(|r| r.provider_id.as_str()).collect();
    assert_eq!(order, ["sim-aws", "sim-alibaba", "sim-gcf"]);
}

#[test]
fn empty_cloud_log_is_unjoinable() {
    let tmp = tempfile::tempdir().unwrap();
    cmd_fixtures(tmp.path()).unwrap();
    let dir = tmp.path().join("fixture-image-processing-sim-aws");
    fs::remove_file(dir.join("cloud.jsonl")).unwrap();
    assert_eq!(cmd_analyze(&[dir], &AnalyzeOptions::default()).unwrap_err().exit_code(), 4);
}

#[test]
fn simulate_burst_scenario_throttles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd_simulate(&root().join("scenarios/burst-200-limit-50.toml"), tmp.path(), None).unwrap();
    assert_eq!(out.summary.submitted, 200);
    assert!(out.summary.throttle_events >= 150, "{:?}", out.summary);
    assert!(out.console.contains("throttle events"));
    assert!(out.console.contains(&out.cloud_sha256));
}

#[test]
fn simulate_seed_override_changes_export() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = root().join("scenarios/tail-scenario.toml");
    let a = cmd_simulate(&scenario, tmp.path(), Some(1)).unwrap();
    let b = cmd_simulate(&scenario, tmp.path(), Some(2)).unwrap();
    let c = cmd_simulate(&scenario, tmp.path(), Some(1)).unwrap();
    assert_ne!(a.cloud_sha256, b.cloud_sha256);
    assert_eq!(a.cloud_sha256, c.cloud_sha256);
    assert_ne!(a.run_dir, c.run_dir);
}

#[test]
fn simulated_tail_run_analyzes_with_both_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = cmd_simulate(&root().join("scenarios/tail-scenario.toml"), tmp.path(), None).unwrap();
    assert!(sim.tails.scenario_a >= 1 && sim.tails.scenario_b >= 1, "{:?}", sim.tails);
    let out = cmd_analyze(&[sim.run_dir], &AnalyzeOptions::default()).unwrap();
    let t = &out.reports[0].tail_scenarios;
    assert_eq!((t.scenario_a, t.scenario_b), (sim.tails.scenario_a, sim.tails.scenario_b));
}

#[test]
fn invalid_scenario_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.toml");
    let text = fs::read_to_string(root().join("scenarios/burst-200-limit-50.toml")).unwrap();
    fs::write(&path, text.replace("concurrency_limit = 50", "concurrency_limit = 0")).unwrap();
    assert_eq!(cmd_simulate(&path, tmp.path(), None).unwrap_err().exit_code(), 2);
    fs::write(&path, "name = 1").unwrap();
    assert_eq!(cmd_simulate(&path, tmp.path(), None).unwrap_err().exit_code(), 2);
    let out = bin().args(["simulate", path.to_str().unwrap(), "--out-dir", tmp.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_translates_native_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = root().join("crates/core/tests/fixtures");
    let out = tmp.path().join("cloud.jsonl");
    let console = cmd_ingest(
        &fixtures.join("gcf-execution.native.jsonl"),
        "sim-gcf",
        Some(&fixtures.join("gcf-execution.toml")),
        &out,
    )
    .unwrap();
    assert!(console.starts_with("2 entries"), "{console}");
    let written = fs::read_to_string(&out).unwrap();
    let expected = fs::read_to_string(fixtures.join("gcf-execution.expected.jsonl")).unwrap();
    let parse = |s: &str| -> Vec<serde_json::Value> { s.lines().map(|l| serde_json::from_str(l).unwrap()).collect() };
    assert_eq!(parse(&written), parse(&expected));
}
