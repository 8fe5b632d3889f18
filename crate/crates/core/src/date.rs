//! Calendar months encoded the way the source files store them (`yyyymm`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    /// Parses the integer form, e.g. `198001`.
    pub fn from_yyyymm(code: i64) -> Option<Self> {
        if code < 0 {
            return None;
        }
        let year = i32::try_from(code / 100).ok()?;
        let month = u32::try_from(code % 100).ok()?;
        Self::new(year, month)
    }

    pub fn yyyymm(self) -> i64 {
        i64::from(self.year) * 100 + i64::from(self.month)
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        let idx = self.ordinal() + n;
        Self {
            year: i32::try_from(idx.div_euclid(12)).expect("year out of range"),
            month: u32::try_from(idx.rem_euclid(12)).expect("month in 0..12") + 1,
        }
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: Self) -> i64 {
        other.ordinal() - self.ordinal()
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || Error::Format(format!("`{s}` is not a valid yyyymm month"));
        if t.len() != 6 || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let code: i64 = t.parse().map_err(|_| bad())?;
        Self::from_yyyymm(code).ok_or_else(bad)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(self.yyyymm())
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Self::from_yyyymm(i)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid yyyymm {i}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_arithmetic() {
        let jan80 = YearMonth::new(1980, 1).unwrap();
        assert_eq!(jan80.pred().to_string(), "197912");
        assert_eq!(jan80.add_months(488).to_string(), "202009");
        assert_eq!(jan80.months_until(YearMonth::new(2020, 9).unwrap()), 488);
        assert_eq!(YearMonth::new(1950, 1).unwrap().months_until(YearMonth::new(2020, 9).unwrap()) + 1, 849);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("198013".parse::<YearMonth>().is_err());
        assert!("19801".parse::<YearMonth>().is_err());
        assert!("1980-1".parse::<YearMonth>().is_err());
        assert_eq!("198001".parse::<YearMonth>().unwrap().yyyymm(), 198001);
    }
}
