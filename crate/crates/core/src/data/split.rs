use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::RawSeries;

/// Inclusive calendar range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Validation, SplitKind::Test];

    pub fn label(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "val",
            SplitKind::Test => "test",
        }
    }
}

/// Contiguous train / validation / test periods in that order, plus
/// optional ranges that are dropped entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: DateRange,
    pub validation: DateRange,
    pub test: DateRange,
    #[serde(default)]
    pub exclusions: Vec<DateRange>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

impl SplitSpec {
    pub fn new(train: DateRange, validation: DateRange, test: DateRange) -> Result<Self> {
        let spec = Self {
            train,
            validation,
            test,
            exclusions: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 2015-2021 equity layout with the spring-2020 crash removed.
    pub fn equity_2015_2021() -> Self {
        Self {
            train: DateRange::new(ymd(2015, 1, 5), ymd(2019, 12, 31)),
            validation: DateRange::new(ymd(2020, 5, 4), ymd(2020, 12, 28)),
            test: DateRange::new(ymd(2020, 12, 29), ymd(2021, 6, 8)),
            exclusions: vec![DateRange::new(ymd(2020, 1, 1), ymd(2020, 5, 3))],
        }
    }

    /// Splits the series' own dates by row fractions.
    pub fn by_fraction(series: &RawSeries, train: f64, validation: f64) -> Result<Self> {
        let dates = series.dates();
        let n = dates.len();
        if !(train > 0.0 && validation > 0.0 && train + validation < 1.0) {
            return Err(Error::Config(format!(
                "split fractions {train}/{validation} leave no test period"
            )));
        }
        let n_train = (n as f64 * train).round() as usize;
        let n_val = (n as f64 * validation).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::Data(format!("{n} rows are too few to split")));
        }
        Self::new(
            DateRange::new(dates[0], dates[n_train - 1]),
            DateRange::new(dates[n_train], dates[n_train + n_val - 1]),
            DateRange::new(dates[n_train + n_val], dates[n - 1]),
        )
    }

    pub fn with_exclusion(mut self, range: DateRange) -> Self {
        self.exclusions.push(range);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if r.start > r.end {
                return Err(Error::Config(format!("{name} range starts after it ends")));
            }
        }
        if self.train.end >= self.validation.start || self.validation.end >= self.test.start {
            return Err(Error::Config(
                "splits must be ordered train < validation < test without overlap".into(),
            ));
        }
        Ok(())
    }

    pub fn is_excluded(&self, d: NaiveDate) -> bool {
        self.exclusions.iter().any(|r| r.contains(d))
    }

    pub fn assign(&self, d: NaiveDate) -> Option<SplitKind> {
        if self.is_excluded(d) {
            None
        } else if self.train.contains(d) {
            Some(SplitKind::Train)
        } else if self.validation.contains(d) {
            Some(SplitKind::Validation)
        } else if self.test.contains(d) {
            Some(SplitKind::Test)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equity_layout_is_valid() {
        let s = SplitSpec::equity_2015_2021();
        s.validate().unwrap();
        assert_eq!(s.assign(ymd(2020, 3, 16)), None);
        assert_eq!(s.assign(ymd(2019, 6, 3)), Some(SplitKind::Train));
        assert_eq!(s.assign(ymd(2021, 1, 4)), Some(SplitKind::Test));
    }

    #[test]
    fn overlapping_rejected() {
        let r = DateRange::new(ymd(2020, 1, 1), ymd(2020, 6, 1));
        let later = DateRange::new(ymd(2020, 7, 1), ymd(2020, 8, 1));
        assert!(SplitSpec::new(r, r, later).is_err());
        assert!(SplitSpec::new(later, r, r).is_err());
    }
}
