//! Exact fixed-point money.
//!
//! Fee totals are carried as integer micro-dollars ([`Money`]). Per-unit rates
//! such as $0.0000166667 per GB-second are finer than a micro-dollar, so they
//! are carried as integer pico-dollars ([`UnitPrice`]). Both parse from decimal
//! strings without going through binary floating point.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MICROS_PER_DOLLAR: i64 = 1_000_000;
pub const PICOS_PER_DOLLAR: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal amount {input:?}: {reason}")]
pub struct ParseMoneyError {
    input: String,
    reason: &'static str,
}

/// Parses a non-negative decimal string into an integer scaled by `10^scale`.
/// Digits beyond `scale` must be zero; silently truncating a rate would change
/// every fee computed from it.
fn parse_scaled(input: &str, scale: u32) -> Result<u128, ParseMoneyError> {
    let err = |reason| ParseMoneyError { input: input.to_string(), reason };
    let s = input.trim().trim_start_matches('$');
    if s.is_empty() {
        return Err(err("empty"));
    }
    if s.starts_with('-') {
        return Err(err("negative amounts are not allowed"));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(idx) => {
            let exp: i32 = s[idx + 1..].parse().map_err(|_| err("bad exponent"))?;
            (&s[..idx], exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err("not a decimal number"));
    }
    let digits: String = format!("{int_part}{frac_part}");
    // value = digits * 10^(exponent - frac_len); we want value * 10^scale.
    let shift = exponent + scale as i32 - frac_part.len() as i32;
    let digits = digits.trim_start_matches('0');
    let mut value: u128 = 0;
    if shift >= 0 {
        for b in digits.bytes() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u128::from(b - b'0')))
                .ok_or_else(|| err("overflow"))?;
        }
        for _ in 0..shift {
            value = value.checked_mul(10).ok_or_else(|| err("overflow"))?;
        }
    } else {
        let cut = (-shift) as usize;
        let (keep, dropped) = if digits.len() > cut {
            digits.split_at(digits.len() - cut)
        } else {
            ("", digits)
        };
        if dropped.bytes().any(|b| b != b'0') {
            return Err(err("more precision than the fixed-point scale supports"));
        }
        for b in keep.bytes() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u128::from(b - b'0')))
                .ok_or_else(|| err("overflow"))?;
        }
    }
    Ok(value)
}

fn format_scaled(value: u128, scale: u32) -> String {
    let unit = 10u128.pow(scale);
    let int = value / unit;
    let frac = value % unit;
    if frac == 0 {
        return int.to_string();
    }
    let frac = format!("{:0width$}", frac, width = scale as usize);
    format!("{int}.{}", frac.trim_end_matches('0'))
}

/// Rounds `num / den` half-up. Both operands must be non-negative.
pub(crate) fn div_round_half_up(num: i128, den: i128) -> i128 {
    debug_assert!(num >= 0 && den > 0);
    (num + den / 2) / den
}

/// An amount of US dollars in integer micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money {
    micro_usd: i64,
}

impl Money {
    pub const ZERO: Money = Money { micro_usd: 0 };

    pub const fn from_micros(micro_usd: i64) -> Self {
        Money { micro_usd }
    }

    pub fn from_dollars_str(s: &str) -> Result<Self, ParseMoneyError> {
        let micros = parse_scaled(s, 6)?;
        let micro_usd = i64::try_from(micros).map_err(|_| ParseMoneyError {
            input: s.to_string(),
            reason: "overflow",
        })?;
        Ok(Money { micro_usd })
    }

    pub const fn micros(self) -> i64 {
        self.micro_usd
    }

    /// Lossy; only for scoring and plotting, never for fee arithmetic.
    pub fn as_dollars_f64(self) -> f64 {
        self.micro_usd as f64 / MICROS_PER_DOLLAR as f64
    }

    /// Whole cents, rounded half-up (half away from zero for negatives).
    pub fn cents_rounded(self) -> i64 {
        let m = i128::from(self.micro_usd);
        let c = if m >= 0 {
            div_round_half_up(m, 10_000)
        } else {
            -div_round_half_up(-m, 10_000)
        };
        c as i64
    }

    /// Display form, e.g. `$43.38`.
    pub fn display_cents(self) -> String {
        let cents = self.cents_rounded();
        let sign = if cents < 0 { "-" } else { "" };
        let cents = cents.unsigned_abs();
        format!("{sign}${}.{:02}", cents / 100, cents % 100)
    }

    pub fn saturating_sub(self, other: Money) -> Money {
        Money::from_micros(self.micro_usd.saturating_sub(other.micro_usd))
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_cents())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money::from_micros(self.micro_usd + rhs.micro_usd)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.micro_usd += rhs.micro_usd;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money::from_micros(self.micro_usd - rhs.micro_usd)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl FromStr for Money {
    type Err = ParseMoneyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Money::from_dollars_str(s)
    }
}

/// A per-unit rate in integer pico-dollars (10⁻¹² USD).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitPrice {
    pico_usd: u64,
}

impl UnitPrice {
    pub const ZERO: UnitPrice = UnitPrice { pico_usd: 0 };

    pub const fn from_picos(pico_usd: u64) -> Self {
        UnitPrice { pico_usd }
    }

    pub fn from_dollars_str(s: &str) -> Result<Self, ParseMoneyError> {
        let picos = parse_scaled(s, 12)?;
        let pico_usd = u64::try_from(picos).map_err(|_| ParseMoneyError {
            input: s.to_string(),
            reason: "overflow",
        })?;
        Ok(UnitPrice { pico_usd })
    }

    pub const fn picos(self) -> u64 {
        self.pico_usd
    }

    pub fn is_zero(self) -> bool {
        self.pico_usd == 0
    }

    /// Charge for `quantity_micros` millionths of a unit, rounded half-up to
    /// the micro-dollar. Exact integer arithmetic.
    pub fn charge_micro_units(self, quantity_micros: u128) -> Money {
        // micro-units * pico-dollars = 1e-18 dollars; micro-dollars are 1e-6.
        let product = quantity_micros as i128 * i128::from(self.pico_usd);
        Money::from_micros(div_round_half_up(product, 1_000_000_000_000) as i64)
    }
}

impl fmt::Display for UnitPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", format_scaled(u128::from(self.pico_usd), 12))
    }
}

impl FromStr for UnitPrice {
    type Err = ParseMoneyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UnitPrice::from_dollars_str(s)
    }
}

/// Converts a real-valued quantity into integer millionths, rounding half-up.
pub(crate) fn to_micro_units(quantity: f64) -> u128 {
    if !quantity.is_finite() || quantity <= 0.0 {
        return 0;
    }
    (quantity * 1e6).round() as u128
}

struct DecimalVisitor;

impl<'de> Visitor<'de> for DecimalVisitor {
    type Value = String;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a non-negative decimal dollar amount (string or number)")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<String, E> {
        Ok(v.to_string())
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<String, E> {
        Ok(v.to_string())
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<String, E> {
        Ok(v.to_string())
    }

    // Rust prints the shortest representation that round-trips, so a TOML
    // literal like 0.0000166667 comes back as exactly those digits.
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<String, E> {
        Ok(format!("{v}"))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let sign = if self.micro_usd < 0 { "-" } else { "" };
        let s = format_scaled(u128::from(self.micro_usd.unsigned_abs()), 6);
        serializer.serialize_str(&format!("{sign}{s}"))
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = deserializer.deserialize_any(DecimalVisitor)?;
        Money::from_dollars_str(&s).map_err(de::Error::custom)
    }
}

impl Serialize for UnitPrice {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_scaled(u128::from(self.pico_usd), 12))
    }
}

impl<'de> Deserialize<'de> for UnitPrice {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = deserializer.deserialize_any(DecimalVisitor)?;
        UnitPrice::from_dollars_str(&s).map_err(de::Error::custom)
    }
}

/// Serde adapter writing a [`Money`] as `{"micro_usd": n, "display": "$x.yy"}`.
pub mod doc {
    use super::Money;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct MoneyDoc {
        micro_usd: i64,
        display: String,
    }

    pub fn serialize<S: Serializer>(m: &Money, s: S) -> Result<S::Ok, S::Error> {
        MoneyDoc { micro_usd: m.micros(), display: m.display_cents() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Money, D::Error> {
        Ok(Money::from_micros(MoneyDoc::deserialize(d)?.micro_usd))
    }
}
