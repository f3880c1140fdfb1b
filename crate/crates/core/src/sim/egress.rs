use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::client::{ObjectLocator, ProviderRef};
use crate::cost::{tiered_egress_fee, PricingScheme};
use crate::money::Money;

/// One metered read of an object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgressEntry {
    pub src_provider: String,
    pub bucket: String,
    pub key: String,
    /// `None` when the reader is outside every registered provider.
    pub dst_provider: Option<String>,
    pub bytes: u64,
    /// 0 for same-provider reads.
    pub billable_bytes: u64,
    /// Pricing scheme whose tiers applied; `None` for a zero-egress provider.
    pub rate_model: Option<String>,
    #[serde(with = "crate::money::doc")]
    pub fee: Money,
}

#[derive(Default)]
struct LedgerState {
    entries: Vec<EgressEntry>,
    /// Cumulative billable bytes per source provider, for tier placement.
    volume: HashMap<String, u64>,
}

/// Shared, append-only record of object reads across providers.
#[derive(Default)]
pub struct EgressLedger {
    state: Mutex<LedgerState>,
}

impl EgressLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a read of `bytes` from `src` by a reader on `dst`.
    ///
    /// The fee is the marginal tiered fee: billable bytes land on top of the
    /// source provider's volume so far, so a run crossing a tier boundary is
    /// charged at both rates.
    pub fn meter_transfer(
        &self,
        src: &ObjectLocator,
        dst: Option<&ProviderRef>,
        bytes: u64,
        model: Option<&PricingScheme>,
    ) -> EgressEntry {
        let src_id = &src.provider.provider_id;
        let same_provider = dst.is_some_and(|d| &d.provider_id == src_id);
        let billable = if same_provider { 0 } else { bytes };
        let mut state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let before = state.volume.get(src_id).copied().unwrap_or(0);
        let after = before + billable;
        let fee = match model {
            Some(scheme) if billable > 0 => {
                tiered_egress_fee(&scheme.egress_tiers, after)
                    - tiered_egress_fee(&scheme.egress_tiers, before)
            }
            _ => Money::ZERO,
        };
        state.volume.insert(src_id.clone(), after);
        let entry = EgressEntry {
            src_provider: src_id.clone(),
            bucket: src.bucket.clone(),
            key: src.key.clone(),
            dst_provider: dst.map(|d| d.provider_id.clone()),
            bytes,
            billable_bytes: billable,
            rate_model: model.map(|m| m.provider_id.clone()),
            fee,
        };
        state.entries.push(entry.clone());
        entry
    }

    pub fn entries(&self) -> Vec<EgressEntry> {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).entries.clone()
    }

    pub fn total_billable_bytes(&self) -> u64 {
        self.entries().iter().map(|e| e.billable_bytes).sum()
    }

    pub fn total_fee(&self) -> Money {
        self.entries().iter().map(|e| e.fee).sum()
    }
}

impl std::fmt::Debug for EgressLedger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let state = self.state.lock().unwrap_or_else(|p| p.into_inner());
        f.debug_struct("EgressLedger").field("entries", &state.entries.len()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Catalog;

    const MB5: u64 = 5_000_000;

    fn loc(provider: &str) -> ObjectLocator {
        ObjectLocator::new(ProviderRef::simulated(provider), "images", "img/0001.jpg").unwrap()
    }

    #[test]
    fn same_provider_read_is_free() {
        let cat = Catalog::bundled();
        let ledger = EgressLedger::new();
        let aws = ProviderRef::simulated("sim-aws");
        let e = ledger.meter_transfer(
            &loc("sim-aws"),
            Some(&aws),
            MB5,
            Some(cat.scheme("aws-lambda-x86").unwrap()),
        );
        assert_eq!(e.billable_bytes, 0);
        assert_eq!(e.fee, Money::ZERO);
    }

    #[test]
    fn cross_provider_read_bills_at_source_tiers() {
        let cat = Catalog::bundled();
        let ledger = EgressLedger::new();
        let gcp = ProviderRef::simulated("sim-google");
        let e = ledger.meter_transfer(
            &loc("sim-aws"),
            Some(&gcp),
            MB5,
            Some(cat.scheme("aws-lambda-x86").unwrap()),
        );
        assert_eq!(e.billable_bytes, MB5);
        // 0.005 GB at $0.09
        assert_eq!(e.fee, Money::from_micros(450));
        assert_eq!(ledger.total_billable_bytes(), MB5);
    }

    #[test]
    fn zero_egress_provider_bills_nothing() {
        let ledger = EgressLedger::new();
        let e = ledger.meter_transfer(
            &loc("sim-r2"),
            Some(&ProviderRef::simulated("sim-aws")),
            MB5,
            None,
        );
        assert_eq!(e.billable_bytes, MB5);
        assert_eq!(e.fee, Money::ZERO);
        assert_eq!(e.rate_model, None);
    }

    #[test]
    fn marginal_fees_sum_to_tiered_fee_of_total() {
        let cat = Catalog::bundled();
        let aws = cat.scheme("aws-lambda-x86").unwrap();
        let ledger = EgressLedger::new();
        let gb = 1_000_000_000u64;
        for _ in 0..3 {
            ledger.meter_transfer(&loc("sim-aws"), None, 4_000 * gb, Some(aws));
        }
        assert_eq!(ledger.total_fee(), tiered_egress_fee(&aws.egress_tiers, 12_000 * gb));
    }
}
