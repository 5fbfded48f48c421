//! Calendar dates and whole-year age arithmetic.

use core::fmt;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

pub use chrono::NaiveDate as Date;

/// Age in whole years at `at`, counted by anniversaries of `birth`.
///
/// Negative when `at` precedes `birth`. A 29 February birthday has its
/// anniversary on 1 March in non-leap years.
pub fn whole_years(birth: Date, at: Date) -> i32 {
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    years
}

/// Inclusive bounds in whole years. Serialized as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct AgeRange {
    pub min: u32,
    pub max: u32,
}

impl AgeRange {
    pub const ADULTS: AgeRange = AgeRange { min: 18, max: 120 };
    pub const CHILDREN: AgeRange = AgeRange { min: 0, max: 17 };

    pub fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub fn is_inverted(&self) -> bool {
        self.min > self.max
    }

    pub fn contains(&self, years: i32) -> bool {
        years >= 0 && (self.min as i64..=self.max as i64).contains(&(years as i64))
    }

    /// Whether the age at `at` of someone born on `birth` falls in range.
    pub fn contains_age(&self, birth: Date, at: Date) -> bool {
        self.contains(whole_years(birth, at))
    }
}

impl From<[u32; 2]> for AgeRange {
    fn from([min, max]: [u32; 2]) -> Self {
        Self { min, max }
    }
}

impl From<AgeRange> for [u32; 2] {
    fn from(r: AgeRange) -> Self {
        [r.min, r.max]
    }
}

impl fmt::Display for AgeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.min, self.max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Date {
        s.parse().unwrap()
    }

    #[test]
    fn whole_years_is_anniversary_based() {
        assert_eq!(whole_years(d("2000-05-10"), d("2004-05-09")), 3);
        assert_eq!(whole_years(d("2000-05-10"), d("2004-05-10")), 4);
        assert_eq!(whole_years(d("2000-05-10"), d("2000-05-10")), 0);
        assert_eq!(whole_years(d("2000-05-10"), d("1999-05-10")), -1);
    }

    #[test]
    fn leap_day_birthday() {
        assert_eq!(whole_years(d("2000-02-29"), d("2001-02-28")), 0);
        assert_eq!(whole_years(d("2000-02-29"), d("2001-03-01")), 1);
        assert_eq!(whole_years(d("2000-02-29"), d("2004-02-29")), 4);
    }

    #[test]
    fn age_range_bounds_are_inclusive() {
        let r = AgeRange::new(18, 100);
        assert!(r.contains(18));
        assert!(r.contains(100));
        assert!(!r.contains(17));
        assert!(!r.contains(101));
        assert!(!AgeRange::new(0, 3).contains(-1));
        assert!(AgeRange::new(30, 20).is_inverted());
    }
}
