//! Two-decimal fixed-point values used for ratios and day averages.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A nonnegative quantity stored as hundredths.
///
/// Values are computed from integer numerators and denominators so the
/// rendered text ("0.91", "20.00") never depends on float formatting.
/// Serialized as a JSON string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed2(u64);

impl Fixed2 {
    pub const ZERO: Fixed2 = Fixed2(0);

    pub fn from_hundredths(hundredths: u64) -> Self {
        Fixed2(hundredths)
    }

    /// `numerator / denominator` rounded half-up to two decimals; zero when
    /// the denominator is zero.
    pub fn from_ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            return Fixed2::ZERO;
        }
        let scaled = u128::from(numerator) * 100;
        let den = u128::from(denominator);
        let rounded = (scaled * 2 + den) / (den * 2);
        Fixed2(rounded as u64)
    }

    pub fn hundredths(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Fixed2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid two-decimal value: {0:?}")]
pub struct ParseFixed2Error(String);

impl FromStr for Fixed2 {
    type Err = ParseFixed2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFixed2Error(s.to_string());
        let (whole, frac) = s.split_once('.').ok_or_else(err)?;
        if frac.len() != 2 || whole.is_empty() {
            return Err(err());
        }
        let whole: u64 = whole.parse().map_err(|_| err())?;
        let frac: u64 = frac.parse().map_err(|_| err())?;
        Ok(Fixed2(whole * 100 + frac))
    }
}

impl Serialize for Fixed2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fixed2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
