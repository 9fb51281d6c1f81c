//! Simulation clock.
//!
//! Every instant and duration inside the simulator is an integer count of
//! nanoseconds. Milliseconds (as `f64` or as fixed-point decimal text) only
//! appear at the boundaries: configuration files, CSV and the utility
//! functions.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const TICKS_PER_MS: i64 = 1_000_000;

/// An instant or a duration, in nanosecond ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    /// The smallest representable duration. Used as the `ε` added to the
    /// recorded completion of a dropped packet.
    pub const TICK: SimTime = SimTime(1);
    pub const MAX: SimTime = SimTime(i64::MAX);

    /// Converts milliseconds to ticks, rounding to the nearest nanosecond.
    pub fn from_ms(ms: f64) -> SimTime {
        SimTime((ms * TICKS_PER_MS as f64).round() as i64)
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / TICKS_PER_MS as f64
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    /// Fixed-point millisecond text with `decimals` digits (at most 9).
    ///
    /// Exact for `decimals >= 6`, since a tick is 1e-6 ms.
    pub fn format_ms(self, decimals: usize) -> String {
        assert!(decimals <= 9, "at most 9 decimals supported");
        let neg = self.0 < 0;
        let abs = self.0.unsigned_abs();
        let int = abs / TICKS_PER_MS as u64;
        // fractional part in units of 1e-9 ms
        let frac = (abs % TICKS_PER_MS as u64) * 1000;
        let sign = if neg { "-" } else { "" };
        if decimals == 0 {
            return format!("{sign}{int}");
        }
        let digits = format!("{frac:09}");
        format!("{sign}{int}.{}", &digits[..decimals])
    }

    /// Parses decimal millisecond text exactly (no floating point).
    ///
    /// Digits beyond the sixth decimal must be zero; anything finer than a
    /// tick cannot be represented.
    pub fn parse_ms(text: &str) -> Result<SimTime, ParseTimeError> {
        let err = || ParseTimeError(text.to_string());
        let s = text.trim();
        let (neg, s) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
        let (kept, rest) = frac_part.split_at(frac_part.len().min(6));
        if rest.chars().any(|c| c != '0') {
            return Err(err());
        }
        let mut frac: i64 = if kept.is_empty() { 0 } else { kept.parse().map_err(|_| err())? };
        for _ in kept.len()..6 {
            frac *= 10;
        }
        let ticks = int
            .checked_mul(TICKS_PER_MS)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(err)?;
        Ok(SimTime(if neg { -ticks } else { ticks }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid millisecond value `{0}` (expected decimal ms with at most 6 significant decimals)")]
pub struct ParseTimeError(pub String);

impl FromStr for SimTime {
    type Err = ParseTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SimTime::parse_ms(s)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.format_ms(6))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}
