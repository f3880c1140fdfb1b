//! Pricing catalog: versioned, human-edited rate cards loaded from TOML.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::money::{Money, UnitPrice};

/// The catalog shipped with the crate.
pub const DEFAULT_CATALOG_TOML: &str = include_str!("../../../../catalog/default-pricing.toml");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scheme {scheme:?}: invalid {field}: {reason}")]
    Invalid { scheme: String, field: String, reason: String },
    #[error("unknown pricing scheme {0:?}")]
    UnknownScheme(String),
    #[error("scheme {scheme:?} has no CPU meter")]
    NoCpuMeter { scheme: String },
    #[error("scheme {scheme:?} has no GHz mapping for {memory_mb} MB; known tiers: {known:?}")]
    UnknownMemoryTier { scheme: String, memory_mb: u32, known: Vec<u32> },
}

/// One egress price band. `upper_bound_gb` is the cumulative decimal-GB
/// ceiling of the band; `None` marks the final, unbounded band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound_gb: Option<f64>,
    pub rate_per_gb: Money,
}

impl TierRate {
    pub fn upper_bound_bytes(&self) -> Option<u64> {
        self.upper_bound_gb.map(gb_to_bytes)
    }
}

pub(crate) fn gb_to_bytes(gb: f64) -> u64 {
    (gb * 1e9).round() as u64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeTier {
    #[serde(default)]
    pub duration_gbs: f64,
    #[serde(default)]
    pub cpu_ghzs: f64,
    #[serde(default)]
    pub invocations: u64,
    #[serde(default)]
    pub egress_gb: f64,
    #[serde(default)]
    pub ephemeral_included_gb: f64,
}

/// A provider's complete rate card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingScheme {
    pub provider_id: String,
    pub duration_rate_per_gbs: UnitPrice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_rate_per_ghzs: Option<UnitPrice>,
    pub invocation_rate_per_million: Money,
    pub egress_tiers: Vec<TierRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ephemeral_rate_per_gbs: Option<UnitPrice>,
    #[serde(default)]
    pub free_tier: FreeTier,
    #[serde(default = "default_granularity")]
    pub billing_granularity_ms: u64,
    /// Memory tier (MB, as a string key in TOML) to allocated GHz.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub memory_to_ghz: BTreeMap<String, f64>,
    /// Informational measurements; never used in fee computation.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profile: BTreeMap<String, toml::Value>,
}

fn default_granularity() -> u64 {
    1
}

impl PricingScheme {
    /// GHz allocated to a memory tier. Only schemes with a CPU meter carry
    /// the mapping.
    pub fn ghz_for_memory(&self, memory_mb: u32) -> Result<f64, CatalogError> {
        if self.cpu_rate_per_ghzs.is_none() {
            return Err(CatalogError::NoCpuMeter { scheme: self.provider_id.clone() });
        }
        self.memory_to_ghz
            .get(&memory_mb.to_string())
            .copied()
            .ok_or_else(|| CatalogError::UnknownMemoryTier {
                scheme: self.provider_id.clone(),
                memory_mb,
                known: self.known_memory_tiers(),
            })
    }

    pub fn known_memory_tiers(&self) -> Vec<u32> {
        let mut tiers: Vec<u32> =
            self.memory_to_ghz.keys().filter_map(|k| k.parse().ok()).collect();
        tiers.sort_unstable();
        tiers
    }

    /// Checks every structural invariant; the error names scheme and field.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |field: &str, reason: String| CatalogError::Invalid {
            scheme: self.provider_id.clone(),
            field: field.to_string(),
            reason,
        };
        if self.provider_id.trim().is_empty() {
            return Err(invalid("provider_id", "must not be empty".into()));
        }
        if self.duration_rate_per_gbs.is_zero() {
            return Err(invalid("duration_rate_per_gbs", "must be > 0".into()));
        }
        if self.billing_granularity_ms == 0 {
            return Err(invalid("billing_granularity_ms", "must be >= 1".into()));
        }
        if self.egress_tiers.is_empty() {
            return Err(invalid("egress_tiers", "at least one tier is required".into()));
        }
        let last = self.egress_tiers.len() - 1;
        let mut previous: Option<f64> = None;
        for (i, tier) in self.egress_tiers.iter().enumerate() {
            match tier.upper_bound_gb {
                None if i != last => {
                    return Err(invalid(
                        &format!("egress_tiers[{i}].upper_bound_gb"),
                        "only the last tier may be unbounded".into(),
                    ));
                }
                Some(_) if i == last => {
                    return Err(invalid(
                        &format!("egress_tiers[{i}].upper_bound_gb"),
                        "the last tier must be unbounded".into(),
                    ));
                }
                Some(bound) => {
                    if !bound.is_finite() || bound <= 0.0 {
                        return Err(invalid(
                            &format!("egress_tiers[{i}].upper_bound_gb"),
                            format!("{bound} is not a positive bound"),
                        ));
                    }
                    if let Some(prev) = previous {
                        if bound <= prev {
                            return Err(invalid(
                                &format!("egress_tiers[{i}].upper_bound_gb"),
                                format!("{bound} is not greater than the previous bound {prev}"),
                            ));
                        }
                    }
                    previous = Some(bound);
                }
                None => {}
            }
        }
        let free = &self.free_tier;
        for (name, v) in [
            ("free_tier.duration_gbs", free.duration_gbs),
            ("free_tier.cpu_ghzs", free.cpu_ghzs),
            ("free_tier.egress_gb", free.egress_gb),
            ("free_tier.ephemeral_included_gb", free.ephemeral_included_gb),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("{v} must be a finite value >= 0")));
            }
        }
        match (self.cpu_rate_per_ghzs.is_some(), self.memory_to_ghz.is_empty()) {
            (true, true) => {
                return Err(invalid(
                    "memory_to_ghz",
                    "required when cpu_rate_per_ghzs is present".into(),
                ))
            }
            (false, false) => {
                return Err(invalid(
                    "memory_to_ghz",
                    "only allowed when cpu_rate_per_ghzs is present".into(),
                ))
            }
            _ => {}
        }
        for (key, ghz) in &self.memory_to_ghz {
            let field = format!("memory_to_ghz.{key}");
            match key.parse::<u32>() {
                Ok(mb) if mb > 0 => {}
                _ => return Err(invalid(&field, "key must be a positive memory size in MB".into())),
            }
            if !ghz.is_finite() || *ghz <= 0.0 {
                return Err(invalid(&field, format!("{ghz} GHz must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub catalog_version: String,
    pub schemes: Vec<PricingScheme>,
}

impl Catalog {
    pub fn from_toml_str(text: &str) -> Result<Self, CatalogError> {
        let catalog: Catalog = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn bundled() -> Self {
        Catalog::from_toml_str(DEFAULT_CATALOG_TOML).expect("bundled catalog is valid")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = HashSet::new();
        for scheme in &self.schemes {
            scheme.validate()?;
            if !seen.insert(scheme.provider_id.as_str()) {
                return Err(CatalogError::Invalid {
                    scheme: scheme.provider_id.clone(),
                    field: "provider_id".into(),
                    reason: "duplicate provider_id".into(),
                });
            }
        }
        Ok(())
    }

    pub fn scheme(&self, provider_id: &str) -> Result<&PricingScheme, CatalogError> {
        self.schemes
            .iter()
            .find(|s| s.provider_id == provider_id)
            .ok_or_else(|| CatalogError::UnknownScheme(provider_id.to_string()))
    }
}

/// Reads and validates a catalog file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    Catalog::from_toml_str(&text)
}
