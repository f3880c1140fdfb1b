use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisReport};
use crate::money::Money;

/// Relative importance of p99 serving latency and cost. Only the ratio
/// matters; lower scores rank first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub performance: f64,
    pub cost: f64,
}

impl Weights {
    pub const EQUAL: Weights = Weights { performance: 0.5, cost: 0.5 };
    pub const COST_ONLY: Weights = Weights { performance: 0.0, cost: 1.0 };
    pub const PERFORMANCE_ONLY: Weights = Weights { performance: 1.0, cost: 0.0 };

    fn validate(self) -> Result<Self, AnalysisError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.performance) || !ok(self.cost) || self.performance + self.cost == 0.0 {
            return Err(AnalysisError::BadWeights(self.performance, self.cost));
        }
        Ok(self)
    }
}

impl std::str::FromStr for Weights {
    type Err = String;

    /// `"P,C"`, e.g. `"0.5,0.5"`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (p, c) = s.split_once(',').ok_or_else(|| format!("expected P,C but got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let w = Weights { performance: parse(p)?, cost: parse(c)? };
        w.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedProvider {
    /// 1-based.
    pub rank: usize,
    pub provider_id: String,
    pub score: f64,
    pub p99_serving_ms: i64,
    #[serde(with = "crate::money::doc")]
    pub total_cost: Money,
    pub normalized_latency: f64,
    pub normalized_cost: f64,
    pub rationale: String,
}

/// Maps to [0, 1] by min-max; a metric equal across providers maps to 0.
fn normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if max > min { (v - min) / (max - min) } else { 0.0 })
        .collect()
}

/// Orders providers by weighted normalised p99 serving latency and cost
/// (without free tier). Ties break on mean billed duration, then id.
pub fn rank_providers(reports: &[AnalysisReport], weights: Weights) -> Result<Vec<RankedProvider>, AnalysisError> {
    let weights = weights.validate()?;
    if reports.len() < 2 {
        return Err(AnalysisError::TooFewReports(reports.len()));
    }
    let mut names: Vec<String> = reports.iter().map(|r| r.workload_name.clone()).collect();
    names.sort();
    names.dedup();
    if names.len() > 1 {
        return Err(AnalysisError::MismatchedWorkloads(names));
    }
    let p99: Vec<i64> = reports
        .iter()
        .map(|r| r.p99_serving_ms().ok_or_else(|| AnalysisError::MissingLatency(r.provider_id.clone())))
        .collect::<Result<_, _>>()?;
    let costs: Vec<Money> = reports.iter().map(|r| r.cost.no_free_tier.total).collect();
    let norm_lat = normalize(&p99.iter().map(|&v| v as f64).collect::<Vec<_>>());
    let norm_cost = normalize(&costs.iter().map(|c| c.micros() as f64).collect::<Vec<_>>());
    let sum = weights.performance + weights.cost;
    let (wp, wc) = (weights.performance / sum, weights.cost / sum);

    let mut order: Vec<usize> = (0..reports.len()).collect();
    let score = |i: usize| wp * norm_lat[i] + wc * norm_cost[i];
    order.sort_by(|&a, &b| {
        score(a)
            .total_cmp(&score(b))
            .then(reports[a].mean_billed_ms.total_cmp(&reports[b].mean_billed_ms))
            .then_with(|| reports[a].provider_id.cmp(&reports[b].provider_id))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| {
            let (lat_part, cost_part) = (wp * norm_lat[i], wc * norm_cost[i]);
            let driver = if lat_part == 0.0 && cost_part == 0.0 {
                "best on every weighted metric"
            } else if lat_part > cost_part {
                "held back mostly by latency"
            } else if cost_part > lat_part {
                "held back mostly by cost"
            } else {
                "latency and cost weigh equally"
            };
            RankedProvider {
                rank: pos + 1,
                provider_id: reports[i].provider_id.clone(),
                score: score(i),
                p99_serving_ms: p99[i],
                total_cost: costs[i],
                normalized_latency: norm_lat[i],
                normalized_cost: norm_cost[i],
                rationale: format!(
                    "p99 {} ms (normalised {:.2}, weight {:.2}), cost {} (normalised {:.2}, weight {:.2}); {driver}",
                    p99[i],
                    norm_lat[i],
                    wp,
                    costs[i].display_cents(),
                    norm_cost[i],
                    wc
                ),
            }
        })
        .collect())
}
