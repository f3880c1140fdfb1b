use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Shape of a millisecond-valued random quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionSpec {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// ln(X) ~ N(mu, sigma²).
    LogNormal { mu: f64, sigma: f64 },
}

impl DistributionSpec {
    pub fn constant(value: f64) -> Self {
        DistributionSpec::Constant { value }
    }

    pub fn validate(&self, field: &str) -> Result<(), SimError> {
        let bad = |reason: String| SimError::InvalidConfig(format!("{field}: {reason}"));
        match *self {
            DistributionSpec::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                Err(bad(format!("constant {value} must be finite and >= 0")))
            }
            DistributionSpec::Uniform { lo, hi }
                if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) =>
            {
                Err(bad(format!("uniform({lo}, {hi}) needs 0 <= lo <= hi")))
            }
            DistributionSpec::LogNormal { mu, sigma }
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) =>
            {
                Err(bad(format!("lognormal({mu}, {sigma}) needs finite mu and sigma >= 0")))
            }
            _ => Ok(()),
        }
    }

    /// Sample in whole milliseconds.
    pub fn sample_ms<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let v = match *self {
            DistributionSpec::Constant { value } => value,
            DistributionSpec::Uniform { lo, hi } if lo == hi => lo,
            DistributionSpec::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            DistributionSpec::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).map(|d| d.sample(rng)).unwrap_or(0.0)
            }
        };
        v.max(0.0).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    /// Delay before attempt n+1 is `backoff_ms[n-1]`; the last value repeats.
    #[serde(default)]
    pub backoff_ms: Vec<u64>,
}

impl RetryPolicy {
    pub fn backoff_after(&self, attempt: u32) -> u64 {
        let idx = (attempt.saturating_sub(1) as usize).min(self.backoff_ms.len().saturating_sub(1));
        self.backoff_ms.get(idx).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorConfig {
    pub concurrency_limit: usize,
    pub cold_start_ms: DistributionSpec,
    pub warm_service_ms: DistributionSpec,
    pub instance_keep_alive_s: u64,
    pub retry_policy: RetryPolicy,
    /// Default timeout for functions that do not set their own.
    pub timeout_s: u64,
    pub rng_seed: u64,
    /// Pricing scheme whose egress tiers meter reads leaving this provider.
    /// Absent means a zero-egress-fee provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub egress_rate_model: Option<String>,
    #[serde(default = "default_granularity")]
    pub billing_granularity_ms: u64,
    /// Livelock guard: processing an event past this virtual time fails.
    #[serde(default = "default_horizon")]
    pub horizon_s: u64,
}

fn default_granularity() -> u64 {
    1
}

fn default_horizon() -> u64 {
    24 * 3600
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            concurrency_limit: 50,
            cold_start_ms: DistributionSpec::constant(250.0),
            warm_service_ms: DistributionSpec::constant(1000.0),
            instance_keep_alive_s: 600,
            retry_policy: RetryPolicy { max_attempts: 3, backoff_ms: vec![1000, 2000] },
            timeout_s: 20,
            rng_seed: 0,
            egress_rate_model: None,
            billing_granularity_ms: 1,
            horizon_s: default_horizon(),
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.concurrency_limit == 0 {
            return Err(SimError::InvalidConfig("concurrency_limit must be >= 1".into()));
        }
        if self.retry_policy.max_attempts == 0 {
            return Err(SimError::InvalidConfig("retry_policy.max_attempts must be >= 1".into()));
        }
        if self.timeout_s == 0 {
            return Err(SimError::InvalidConfig("timeout_s must be >= 1".into()));
        }
        if self.billing_granularity_ms == 0 {
            return Err(SimError::InvalidConfig("billing_granularity_ms must be >= 1".into()));
        }
        self.cold_start_ms.validate("cold_start_ms")?;
        self.warm_service_ms.validate("warm_service_ms")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn distributions_are_non_negative_and_bounded() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let u = DistributionSpec::Uniform { lo: 10.0, hi: 20.0 };
        let l = DistributionSpec::LogNormal { mu: 5.0, sigma: 1.0 };
        for _ in 0..1000 {
            let v = u.sample_ms(&mut rng);
            assert!((10..=20).contains(&v));
            let _ = l.sample_ms(&mut rng);
        }
        assert_eq!(DistributionSpec::constant(7.4).sample_ms(&mut rng), 7);
    }

    #[test]
    fn rejects_negative_or_inverted_distributions() {
        assert!(DistributionSpec::constant(-1.0).validate("x").is_err());
        assert!(DistributionSpec::Uniform { lo: 5.0, hi: 1.0 }.validate("x").is_err());
        assert!(DistributionSpec::LogNormal { mu: 0.0, sigma: -1.0 }.validate("x").is_err());
    }

    #[test]
    fn config_invariants() {
        let mut c = SimulatorConfig::default();
        assert!(c.validate().is_ok());
        c.concurrency_limit = 0;
        assert!(c.validate().is_err());
        let mut c = SimulatorConfig::default();
        c.retry_policy.max_attempts = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn backoff_repeats_last_value() {
        let p = RetryPolicy { max_attempts: 5, backoff_ms: vec![100, 200] };
        assert_eq!(p.backoff_after(1), 100);
        assert_eq!(p.backoff_after(2), 200);
        assert_eq!(p.backoff_after(4), 200);
        assert_eq!(RetryPolicy { max_attempts: 2, backoff_ms: vec![] }.backoff_after(1), 0);
    }

    #[test]
    fn parses_from_toml() {
        let c: SimulatorConfig = toml::from_str(
            r#"
concurrency_limit = 10
cold_start_ms = { kind = "uniform", lo = 100, hi = 300 }
warm_service_ms = { kind = "lognormal", mu = 7.0, sigma = 0.5 }
instance_keep_alive_s = 60
retry_policy = { max_attempts = 3, backoff_ms = [1000] }
timeout_s = 20
rng_seed = 42
"#,
        )
        .unwrap();
        assert_eq!(c.cold_start_ms, DistributionSpec::Uniform { lo: 100.0, hi: 300.0 });
        assert_eq!(c.horizon_s, 86_400);
    }
}
