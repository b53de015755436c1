//! Calendar months (`YYYY-MM`), the atomic time unit of the panel.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    year: i32,
    month: u8, // 1..=12
}

impl Month {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// Months elapsed since January of year 0; gives a dense integer index.
    pub fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(index: i64) -> Self {
        Self {
            year: index.div_euclid(12) as i32,
            month: (index.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn next(&self) -> Self {
        Self::from_index(self.index() + 1)
    }

    pub fn prev(&self) -> Self {
        Self::from_index(self.index() - 1)
    }

    /// Signed month count from `other` to `self`.
    pub fn months_since(&self, other: Month) -> i64 {
        self.index() - other.index()
    }

    /// Inclusive month range iterator.
    pub fn range_inclusive(start: Month, end: Month) -> impl Iterator<Item = Month> {
        (start.index()..=end.index()).map(Month::from_index)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Domain(format!("invalid month '{s}', expected YYYY-MM")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::Domain(format!("invalid year in month '{s}'")))?;
        if m.len() != 2 {
            return Err(Error::Domain(format!("invalid month '{s}', expected YYYY-MM")));
        }
        let month: u8 = m
            .parse()
            .map_err(|_| Error::Domain(format!("invalid month number in '{s}'")))?;
        Month::new(year, month)
            .ok_or_else(|| Error::Domain(format!("month number out of range in '{s}'")))
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let m: Month = "2012-07".parse().unwrap();
        assert_eq!(m.year(), 2012);
        assert_eq!(m.month(), 7);
        assert_eq!(m.to_string(), "2012-07");
    }

    #[test]
    fn ordering_is_chronological() {
        let a: Month = "2012-12".parse().unwrap();
        let b: Month = "2013-01".parse().unwrap();
        assert!(a < b);
        assert_eq!(b.months_since(a), 1);
        assert_eq!(a.next(), b);
        assert_eq!(b.prev(), a);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!("2012".parse::<Month>().is_err());
        assert!("2012-13".parse::<Month>().is_err());
        assert!("2012-00".parse::<Month>().is_err());
        assert!("2012-7".parse::<Month>().is_err());
        assert!("abcd-07".parse::<Month>().is_err());
    }

    #[test]
    fn range_covers_endpoints() {
        let start: Month = "2010-11".parse().unwrap();
        let end: Month = "2011-02".parse().unwrap();
        let months: Vec<_> = Month::range_inclusive(start, end).collect();
        assert_eq!(months.len(), 4);
        assert_eq!(months[0], start);
        assert_eq!(months[3], end);
    }
}
