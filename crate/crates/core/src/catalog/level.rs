use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LevelFilterError {
    #[error("level bounds must be positive multiples of 100, got {0}")]
    NotHundreds(u32),
    #[error("level range {lo}-{hi} is empty (lo > hi)")]
    Inverted { lo: u32, hi: u32 },
    #[error("unrecognized level filter {0:?} (expected all, LO-HI, or MIN+)")]
    Syntax(String),
}

/// Course-level restriction applied during retrieval.
///
/// Textual form: `all`, `100-200` (inclusive range), `500+` (minimum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LevelFilter {
    #[default]
    All,
    Range {
        lo: u32,
        hi: u32,
    },
    Min(u32),
}

fn check_hundreds(level: u32) -> Result<u32, LevelFilterError> {
    if level == 0 || level % 100 != 0 {
        Err(LevelFilterError::NotHundreds(level))
    } else {
        Ok(level)
    }
}

impl LevelFilter {
    pub fn range(lo: u32, hi: u32) -> Result<Self, LevelFilterError> {
        let (lo, hi) = (check_hundreds(lo)?, check_hundreds(hi)?);
        if lo > hi {
            return Err(LevelFilterError::Inverted { lo, hi });
        }
        Ok(LevelFilter::Range { lo, hi })
    }

    pub fn min(lo: u32) -> Result<Self, LevelFilterError> {
        Ok(LevelFilter::Min(check_hundreds(lo)?))
    }

    pub fn matches(&self, level: u32) -> bool {
        match *self {
            LevelFilter::All => true,
            LevelFilter::Range { lo, hi } => (lo..=hi).contains(&level),
            LevelFilter::Min(lo) => level >= lo,
        }
    }

    /// The four configurations offered to users.
    pub fn standard_buckets() -> [LevelFilter; 4] {
        [
            LevelFilter::All,
            LevelFilter::Range { lo: 100, hi: 200 },
            LevelFilter::Range { lo: 300, hi: 400 },
            LevelFilter::Min(500),
        ]
    }
}

impl fmt::Display for LevelFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelFilter::All => f.write_str("all"),
            LevelFilter::Range { lo, hi } => write!(f, "{lo}-{hi}"),
            LevelFilter::Min(lo) => write!(f, "{lo}+"),
        }
    }
}

impl FromStr for LevelFilter {
    type Err = LevelFilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let syntax = || LevelFilterError::Syntax(s.to_string());
        if s.eq_ignore_ascii_case("all") {
            return Ok(LevelFilter::All);
        }
        if let Some(lo) = s.strip_suffix('+') {
            return LevelFilter::min(lo.trim().parse().map_err(|_| syntax())?);
        }
        if let Some((lo, hi)) = s.split_once('-') {
            let lo = lo.trim().parse().map_err(|_| syntax())?;
            let hi = hi.trim().parse().map_err(|_| syntax())?;
            return LevelFilter::range(lo, hi);
        }
        Err(syntax())
    }
}

impl Serialize for LevelFilter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LevelFilter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
