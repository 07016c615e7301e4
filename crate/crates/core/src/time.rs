//! Multi-granularity timestamps in ISO 8601 prefix form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("malformed timestamp {0:?}")]
    MalformedTimestamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Year,
    Month,
    Day,
}

/// A year, year-month or year-month-day value.
///
/// The granularity is implied by which components are present; a day is
/// never present without a month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeStamp {
    year: u16,
    month: Option<u8>,
    day: Option<u8>,
}

/// Result of comparing two timestamps that may have different granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalOrder {
    Before,
    After,
    /// Equal, or one value is a prefix of the other ("2009-05" vs "2009-05-12").
    Overlaps,
}

pub(crate) fn is_leap_year(year: u16) -> bool {
    let y = year as u32;
    (y.is_multiple_of(4) && !y.is_multiple_of(100)) || y.is_multiple_of(400)
}

pub(crate) fn days_in_month(year: u16, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl TimeStamp {
    pub fn year(year: u16) -> Result<Self, TimeError> {
        if year > 9999 {
            return Err(TimeError::MalformedTimestamp(year.to_string()));
        }
        Ok(Self {
            year,
            month: None,
            day: None,
        })
    }

    pub fn year_month(year: u16, month: u8) -> Result<Self, TimeError> {
        if year > 9999 || !(1..=12).contains(&month) {
            return Err(TimeError::MalformedTimestamp(format!("{year}-{month}")));
        }
        Ok(Self {
            year,
            month: Some(month),
            day: None,
        })
    }

    pub fn ymd(year: u16, month: u8, day: u8) -> Result<Self, TimeError> {
        if year > 9999 || !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(TimeError::MalformedTimestamp(format!("{year}-{month}-{day}")));
        }
        Ok(Self {
            year,
            month: Some(month),
            day: Some(day),
        })
    }

    /// Parses a canonical ISO prefix string: `yyyy`, `yyyy-mm` or `yyyy-mm-dd`.
    pub fn parse(text: &str) -> Result<Self, TimeError> {
        let malformed = || TimeError::MalformedTimestamp(text.to_string());
        let parts: Vec<&str> = text.split('-').collect();
        let widths = [4usize, 2, 2];
        if parts.is_empty() || parts.len() > 3 {
            return Err(malformed());
        }
        let mut nums = [0u16; 3];
        for (i, part) in parts.iter().enumerate() {
            if part.len() != widths[i] || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            nums[i] = part.parse().map_err(|_| malformed())?;
        }
        match parts.len() {
            1 => Self::year(nums[0]),
            2 => Self::year_month(nums[0], nums[1] as u8),
            _ => Self::ymd(nums[0], nums[1] as u8, nums[2] as u8),
        }
        .map_err(|_| malformed())
    }

    pub fn year_value(&self) -> u16 {
        self.year
    }

    pub fn month_value(&self) -> Option<u8> {
        self.month
    }

    pub fn day_value(&self) -> Option<u8> {
        self.day
    }

    pub fn granularity(&self) -> Granularity {
        match (self.month, self.day) {
            (_, Some(_)) => Granularity::Day,
            (Some(_), None) => Granularity::Month,
            _ => Granularity::Year,
        }
    }

    /// Drops components finer than `granularity`.
    pub fn truncate(&self, granularity: Granularity) -> Self {
        match granularity {
            Granularity::Year => Self {
                year: self.year,
                month: None,
                day: None,
            },
            Granularity::Month => Self { day: None, ..*self },
            Granularity::Day => *self,
        }
    }

    /// Compares on the components both values share. A strict prefix
    /// relation (or equality) yields `Overlaps`.
    pub fn compare(&self, other: &Self) -> TemporalOrder {
        let lhs = [
            Some(self.year as u32),
            self.month.map(u32::from),
            self.day.map(u32::from),
        ];
        let rhs = [
            Some(other.year as u32),
            other.month.map(u32::from),
            other.day.map(u32::from),
        ];
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            match (a, b) {
                (Some(a), Some(b)) => match a.cmp(b) {
                    Ordering::Less => return TemporalOrder::Before,
                    Ordering::Greater => return TemporalOrder::After,
                    Ordering::Equal => {}
                },
                _ => break,
            }
        }
        TemporalOrder::Overlaps
    }

    /// Total order used for stable sorting: coarser values sort before
    /// finer values sharing the same prefix.
    pub fn sort_key(&self) -> (u16, u8, u8) {
        (self.year, self.month.unwrap_or(0), self.day.unwrap_or(0))
    }
}

pub fn parse_timestamp(text: &str) -> Result<TimeStamp, TimeError> {
    TimeStamp::parse(text)
}

pub fn compare_timestamps(a: &TimeStamp, b: &TimeStamp) -> TemporalOrder {
    a.compare(b)
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
        }
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl FromStr for TimeStamp {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for TimeStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}
