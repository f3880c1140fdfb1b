//! Fee components and the total cost report.

use serde::{Deserialize, Serialize};

use super::catalog::{gb_to_bytes, PricingScheme, TierRate};
use super::usage::UsageSummary;
use crate::money::{div_round_half_up, to_micro_units, Money};

fn billable_micro_units(quantity: f64, free: f64, apply_free: bool) -> u128 {
    let q = to_micro_units(quantity);
    if apply_free {
        q.saturating_sub(to_micro_units(free))
    } else {
        q
    }
}

/// Memory-time charge.
pub fn duration_fee(usage: &UsageSummary, scheme: &PricingScheme, apply_free: bool) -> Money {
    let billable =
        billable_micro_units(usage.gb_seconds, scheme.free_tier.duration_gbs, apply_free);
    scheme.duration_rate_per_gbs.charge_micro_units(billable)
}

/// CPU-time charge; zero for schemes without a CPU meter.
pub fn cpu_fee(usage: &UsageSummary, scheme: &PricingScheme, apply_free: bool) -> Money {
    let Some(rate) = scheme.cpu_rate_per_ghzs else {
        return Money::ZERO;
    };
    let billable = billable_micro_units(usage.ghz_seconds, scheme.free_tier.cpu_ghzs, apply_free);
    rate.charge_micro_units(billable)
}

pub fn invocation_fee(usage: &UsageSummary, scheme: &PricingScheme, apply_free: bool) -> Money {
    let count = if apply_free {
        usage.invocations.saturating_sub(scheme.free_tier.invocations)
    } else {
        usage.invocations
    };
    let rate = i128::from(scheme.invocation_rate_per_million.micros());
    Money::from_micros(div_round_half_up(i128::from(count) * rate, 1_000_000) as i64)
}

/// Tiered charge for `billable_bytes` of egress, starting from the first tier.
pub fn tiered_egress_fee(tiers: &[TierRate], billable_bytes: u64) -> Money {
    // Σ bytes × micro$/GB, divided by 10⁹ once at the end so there is a single
    // rounding step.
    let mut numerator: i128 = 0;
    let mut lower: u64 = 0;
    for tier in tiers {
        if billable_bytes <= lower {
            break;
        }
        let upper = tier.upper_bound_bytes().unwrap_or(u64::MAX);
        let in_tier = billable_bytes.min(upper) - lower;
        numerator += i128::from(in_tier) * i128::from(tier.rate_per_gb.micros());
        lower = upper;
    }
    Money::from_micros(div_round_half_up(numerator, 1_000_000_000) as i64)
}

pub fn egress_fee(usage: &UsageSummary, scheme: &PricingScheme, apply_free: bool) -> Money {
    let billable = if apply_free {
        usage.egress_bytes.saturating_sub(gb_to_bytes(scheme.free_tier.egress_gb))
    } else {
        usage.egress_bytes
    };
    tiered_egress_fee(&scheme.egress_tiers, billable)
}

/// Disk beyond the included allowance. The allowance is already netted out of
/// `ephemeral_gbs_beyond_included`, so `apply_free` has nothing further to
/// deduct.
pub fn ephemeral_fee(usage: &UsageSummary, scheme: &PricingScheme, _apply_free: bool) -> Money {
    match scheme.ephemeral_rate_per_gbs {
        Some(rate) => rate.charge_micro_units(to_micro_units(usage.ephemeral_gbs_beyond_included)),
        None => Money::ZERO,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(with = "crate::money::doc")]
    pub duration_fee: Money,
    #[serde(with = "crate::money::doc")]
    pub cpu_fee: Money,
    #[serde(with = "crate::money::doc")]
    pub invocation_fee: Money,
    #[serde(with = "crate::money::doc")]
    pub egress_fee: Money,
    #[serde(with = "crate::money::doc")]
    pub ephemeral_fee: Money,
    #[serde(with = "crate::money::doc")]
    pub total: Money,
    pub free_tier_applied: bool,
}

impl CostReport {
    /// Duration and CPU charges together, as some providers present them.
    pub fn compute_fee(&self) -> Money {
        self.duration_fee + self.cpu_fee
    }
}

pub fn total_cost(usage: &UsageSummary, scheme: &PricingScheme, apply_free: bool) -> CostReport {
    let duration_fee = duration_fee(usage, scheme, apply_free);
    let cpu_fee = cpu_fee(usage, scheme, apply_free);
    let invocation_fee = invocation_fee(usage, scheme, apply_free);
    let egress_fee = egress_fee(usage, scheme, apply_free);
    let ephemeral_fee = ephemeral_fee(usage, scheme, apply_free);
    CostReport {
        duration_fee,
        cpu_fee,
        invocation_fee,
        egress_fee,
        ephemeral_fee,
        total: duration_fee + cpu_fee + invocation_fee + egress_fee + ephemeral_fee,
        free_tier_applied: apply_free,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Catalog;
    use proptest::prelude::*;

    fn scheme(id: &str) -> PricingScheme {
        Catalog::bundled().scheme(id).unwrap().clone()
    }

    fn usage_gbs(gb_seconds: f64) -> UsageSummary {
        UsageSummary { gb_seconds, ..Default::default() }
    }

    fn usage_egress_gb(gb: u64) -> UsageSummary {
        UsageSummary { egress_bytes: gb * 1_000_000_000, ..Default::default() }
    }

    fn within_pct(actual: Money, expected_dollars: f64, pct: f64) -> bool {
        let a = actual.as_dollars_f64();
        (a - expected_dollars).abs() <= expected_dollars * pct / 100.0
    }

    #[test]
    fn duration_fee_examples() {
        let aws = scheme("aws-lambda-x86");
        let fee = duration_fee(&usage_gbs(1.937e6), &aws, false);
        assert!(within_pct(fee, 32.33, 0.5), "{fee}");
        assert_eq!(duration_fee(&usage_gbs(400_000.0), &aws, true), Money::ZERO);
        let fee = duration_fee(&usage_gbs(266_000.0), &aws, false);
        assert!(within_pct(fee, 4.43, 1.0), "{fee}");
    }

    #[test]
    fn cpu_fee_examples() {
        let gcf = scheme("gcf-tier1");
        let u = UsageSummary {
            gb_seconds: 2.4215e6,
            billed_seconds: 2.4215e6,
            memory_mb: Some(1024),
            ..Default::default()
        }
        .with_cpu_meter(&gcf)
        .unwrap();
        let cpu = cpu_fee(&u, &gcf, false);
        assert_eq!(cpu.display_cents(), "$33.90");
        let merged = cpu + duration_fee(&u, &gcf, false);
        assert!(within_pct(merged, 39.95, 0.5), "{merged}");
        assert_eq!(cpu_fee(&u, &scheme("aws-lambda-x86"), false), Money::ZERO);
        let small = UsageSummary { ghz_seconds: 199_999.0, ..Default::default() };
        assert_eq!(cpu_fee(&small, &gcf, true), Money::ZERO);
    }

    #[test]
    fn invocation_fee_examples() {
        let million = UsageSummary { invocations: 1_000_000, ..Default::default() };
        assert_eq!(invocation_fee(&million, &scheme("aws-lambda-x86"), false).micros(), 200_000);
        assert_eq!(invocation_fee(&million, &scheme("gcf-tier1"), true), Money::ZERO);
        assert_eq!(
            invocation_fee(&UsageSummary::default(), &scheme("aws-lambda-x86"), false),
            Money::ZERO
        );
    }

    #[test]
    fn egress_fee_examples() {
        let u = usage_egress_gb(482);
        assert_eq!(egress_fee(&u, &scheme("aws-lambda-x86"), false).micros(), 43_380_000);
        assert_eq!(egress_fee(&u, &scheme("gcf-tier1"), false).micros(), 57_840_000);
        assert_eq!(egress_fee(&u, &scheme("alibaba-fc"), false).micros(), 33_740_000);
        // 10,000 × 0.09 + 5,000 × 0.085
        let u = usage_egress_gb(15_000);
        assert_eq!(egress_fee(&u, &scheme("aws-lambda-x86"), false).micros(), 1_325_000_000);
    }

    #[test]
    fn ephemeral_fee_examples() {
        let aws = scheme("aws-lambda-x86");
        let base = UsageSummary { billed_seconds: 1e6, ..Default::default() };
        let none = base.clone().with_ephemeral_disk(512, &aws);
        assert_eq!(ephemeral_fee(&none, &aws, false), Money::ZERO);
        let extra = base.clone().with_ephemeral_disk(1536, &aws);
        let fee = ephemeral_fee(&extra, &aws, false);
        assert_eq!(fee.micros(), 35_800);
        assert_eq!(fee.display_cents(), "$0.04");
        let gcf = scheme("gcf-tier1");
        assert_eq!(ephemeral_fee(&base.with_ephemeral_disk(1536, &gcf), &gcf, false), Money::ZERO);
    }

    #[test]
    fn total_is_sum_of_components() {
        let u = UsageSummary {
            invocations: 1_000_000,
            gb_seconds: 1.937e6,
            billed_seconds: 1.937e6,
            egress_bytes: 482_000_000_000,
            memory_mb: Some(1024),
            ..Default::default()
        };
        let aws = scheme("aws-lambda-x86");
        let full = total_cost(&u, &aws, false);
        let free = total_cost(&u, &aws, true);
        assert!(within_pct(full.total, 75.91, 0.5), "{}", full.total);
        assert!(within_pct(free.total, 60.05, 0.5), "{}", free.total);
        let saving = (full.total - free.total).as_dollars_f64();
        assert!((saving - 15.87).abs() <= 0.02, "{saving}");
        assert!(free.free_tier_applied && !full.free_tier_applied);
    }

    #[test]
    fn cost_report_document_shape() {
        let r = total_cost(&usage_egress_gb(482), &scheme("aws-lambda-x86"), false);
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["egress_fee"]["micro_usd"], 43_380_000);
        assert_eq!(v["egress_fee"]["display"], "$43.38");
        let back: CostReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    /// Brute force: walk the billable volume one whole GB at a time, pricing
    /// each GB at the tier containing it, then the fractional remainder.
    fn per_gb_oracle(tiers: &[TierRate], bytes: u64) -> f64 {
        let rate_at = |gb_index: u64| -> f64 {
            // GB number gb_index covers (gb_index, gb_index+1] in GB
            let position = gb_index as f64 + 1.0;
            for t in tiers {
                match t.upper_bound_gb {
                    Some(b) if position <= b => return t.rate_per_gb.micros() as f64,
                    Some(_) => continue,
                    None => return t.rate_per_gb.micros() as f64,
                }
            }
            unreachable!()
        };
        let whole = bytes / 1_000_000_000;
        let rest = bytes % 1_000_000_000;
        let mut micros = 0.0;
        for gb in 0..whole {
            micros += rate_at(gb);
        }
        micros + rate_at(whole) * rest as f64 / 1e9
    }

    fn arb_tiers() -> impl Strategy<Value = Vec<TierRate>> {
        (prop::collection::vec((1u64..500, 0i64..200_000), 0..3), 0i64..200_000).prop_map(
            |(bounded, last)| {
                let mut upper = 0u64;
                let mut tiers: Vec<TierRate> = bounded
                    .into_iter()
                    .map(|(width, rate)| {
                        upper += width;
                        TierRate {
                            upper_bound_gb: Some(upper as f64),
                            rate_per_gb: Money::from_micros(rate),
                        }
                    })
                    .collect();
                tiers.push(TierRate { upper_bound_gb: None, rate_per_gb: Money::from_micros(last) });
                tiers
            },
        )
    }

    proptest! {
        #[test]
        fn egress_matches_per_gb_oracle(tiers in arb_tiers(), bytes in 0u64..2_000_000_000_000) {
            let fee = tiered_egress_fee(&tiers, bytes).micros() as f64;
            let oracle = per_gb_oracle(&tiers, bytes);
            prop_assert!((fee - oracle).abs() <= 1.0, "fee {fee} oracle {oracle}");
        }

        #[test]
        fn egress_is_continuous_at_boundaries(tiers in arb_tiers(), eps in 1u64..1000) {
            for t in tiers.iter().filter_map(|t| t.upper_bound_bytes()) {
                let below = tiered_egress_fee(&tiers, t - eps).micros();
                let at = tiered_egress_fee(&tiers, t).micros();
                let above = tiered_egress_fee(&tiers, t + eps).micros();
                // ε bytes at ≤ $0.2/GB is far below one micro-dollar of slope
                prop_assert!((at - below).abs() <= 1 && (above - at).abs() <= 1);
            }
        }

        #[test]
        fn whole_gb_single_tier_is_exact(gb in 0u64..1_000_000, rate in 0i64..1_000_000) {
            let tiers = [TierRate { upper_bound_gb: None, rate_per_gb: Money::from_micros(rate) }];
            prop_assert_eq!(tiered_egress_fee(&tiers, gb * 1_000_000_000).micros(), gb as i64 * rate);
        }

        #[test]
        fn fees_monotone_and_free_tier_dominates(
            a in 0.0f64..5e6, b in 0.0f64..5e6,
            inv_a in 0u64..5_000_000, inv_b in 0u64..5_000_000,
            eg_a in 0u64..200_000_000_000_000, eg_b in 0u64..200_000_000_000_000,
            id in prop::sample::select(vec!["aws-lambda-x86", "gcf-tier1", "alibaba-fc"]),
        ) {
            let s = scheme(id);
            let (lo, hi) = (a.min(b), a.max(b));
            let mk = |g: f64, inv: u64, eg: u64| UsageSummary {
                invocations: inv, gb_seconds: g, ghz_seconds: g * 1.4, egress_bytes: eg,
                ephemeral_gbs_beyond_included: g, billed_seconds: g, memory_mb: Some(1024),
            };
            let ul = mk(lo, inv_a.min(inv_b), eg_a.min(eg_b));
            let uh = mk(hi, inv_a.max(inv_b), eg_a.max(eg_b));
            for free in [false, true] {
                prop_assert!(duration_fee(&ul, &s, free) <= duration_fee(&uh, &s, free));
                prop_assert!(cpu_fee(&ul, &s, free) <= cpu_fee(&uh, &s, free));
                prop_assert!(invocation_fee(&ul, &s, free) <= invocation_fee(&uh, &s, free));
                prop_assert!(egress_fee(&ul, &s, free) <= egress_fee(&uh, &s, free));
                prop_assert!(ephemeral_fee(&ul, &s, free) <= ephemeral_fee(&uh, &s, free));
            }
            for u in [&ul, &uh] {
                prop_assert!(total_cost(u, &s, true).total <= total_cost(u, &s, false).total);
                let r = total_cost(u, &s, false);
                prop_assert_eq!(r.total, r.duration_fee + r.cpu_fee + r.invocation_fee + r.egress_fee + r.ephemeral_fee);
            }
        }
    }
}
