//! Console table, JSON document and CDF CSV. The table is rendered from the
//! same [`AnalysisReport`] values the JSON carries, so they cannot disagree.

use serde_json::{json, Value};

use super::{percentile_label, AnalysisReport, CdfPoint, RankedProvider};
use crate::money::Money;

pub const REPORT_SCHEMA_VERSION: u64 = 1;

/// `1000000` as `1M`, `1000` as `1K`; anything else verbatim.
pub fn format_request_count(n: u64) -> String {
    match n {
        n if n >= 1_000_000 && n % 1_000_000 == 0 => format!("{}M", n / 1_000_000),
        n if n >= 1_000 && n % 1_000 == 0 => format!("{}K", n / 1_000),
        n => n.to_string(),
    }
}

fn cost_prefix(r: &AnalysisReport) -> String {
    format!("{} req.", format_request_count(r.extrapolate_to.unwrap_or(r.n_records as u64)))
}

/// Rows of the comparison table: label, then one cell per report.
pub fn table_rows(reports: &[AnalysisReport]) -> Vec<(String, Vec<String>)> {
    let cells = |f: &dyn Fn(&AnalysisReport) -> String| reports.iter().map(f).collect::<Vec<_>>();
    let pct = |r: &AnalysisReport, p: f64| {
        r.latency_percentiles
            .get(&percentile_label(p))
            .map_or_else(|| "n/a".to_string(), |v| format!("{v} ms"))
    };
    let money = |m: Money| m.display_cents();
    let prefix = reports.first().map(cost_prefix).unwrap_or_else(|| "all req.".into());
    let mut rows = vec![
        ("avg. Billing Duration".to_string(), cells(&|r| format!("{} ms", r.mean_billed_ms.round() as i64))),
        (
            "avg. Egress Data Size".to_string(),
            cells(&|r| format!("{} KB", (r.mean_egress_bytes / 1000.0).round() as i64)),
        ),
    ];
    for p in [50.0, 90.0, 95.0, 99.0, 99.9] {
        rows.push((format!("{} percentile Latency", ordinal(p)), cells(&|r| pct(r, p))));
    }
    rows.extend([
        ("Timeouts / Throttles".to_string(), cells(&|r| format!("{} / {}", r.timeout_count, r.throttle_count))),
        (
            "Tail a / b".to_string(),
            cells(&|r| format!("{} / {}", r.tail_scenarios.scenario_a, r.tail_scenarios.scenario_b)),
        ),
        (format!("{prefix} Request Fee"), cells(&|r| money(r.cost.no_free_tier.invocation_fee))),
        (format!("{prefix} Network Fee"), cells(&|r| money(r.cost.no_free_tier.egress_fee))),
        (format!("{prefix} Duration Fee"), cells(&|r| money(r.cost.no_free_tier.compute_fee()))),
        (format!("{prefix} Cost"), cells(&|r| money(r.cost.no_free_tier.total))),
        (format!("{prefix} Cost (Free-tier)"), cells(&|r| money(r.cost.free_tier.total))),
    ]);
    rows
}

fn ordinal(p: f64) -> String {
    let s = percentile_label(p);
    let suffix = match s.as_str() {
        s if s.ends_with('1') && !s.ends_with("11") => "st",
        s if s.ends_with('2') && !s.ends_with("12") => "nd",
        s if s.ends_with('3') && !s.ends_with("13") => "rd",
        _ => "th",
    };
    format!("{s}{suffix}")
}

pub fn text_table(reports: &[AnalysisReport]) -> String {
    let rows = table_rows(reports);
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let col_w: Vec<usize> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| rows.iter().map(|(_, c)| c[i].len()).max().unwrap_or(0).max(r.provider_id.len()))
        .collect();
    let mut out = format!("{:label_w$}", "");
    for (r, w) in reports.iter().zip(&col_w) {
        out.push_str(&format!("  {:>w$}", r.provider_id));
    }
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&format!("{label:label_w$}"));
        for (c, w) in cells.iter().zip(&col_w) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
    }
    out
}

pub fn ranking_text(ranking: &[RankedProvider]) -> String {
    ranking
        .iter()
        .map(|r| format!("{}. {} (score {:.3}): {}\n", r.rank, r.provider_id, r.score, r.rationale))
        .collect()
}

pub fn report_json(reports: &[AnalysisReport], ranking: Option<&[RankedProvider]>) -> Value {
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "reports": reports,
        "ranking": ranking,
    })
}

pub fn cdf_csv(points: &[CdfPoint]) -> String {
    let mut out = String::from("value_ms,cumulative_fraction\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.value_ms, p.cumulative_fraction));
    }
    out
}
