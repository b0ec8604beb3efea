use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub date: NaiveDate,
    pub close: f64,
    pub sentiment: Option<f64>,
}

/// Date-sorted daily records with strictly increasing dates and positive
/// closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    records: Vec<Record>,
}

impl RawSeries {
    pub fn new(mut records: Vec<Record>) -> Result<Self> {
        records.sort_by_key(|r| r.date);
        for pair in records.windows(2) {
            if pair[0].date == pair[1].date {
                return Err(Error::Data(format!("duplicate date {}", pair[0].date)));
            }
        }
        if let Some(bad) = records.iter().find(|r| !(r.close > 0.0) || !r.close.is_finite()) {
            return Err(Error::Data(format!(
                "non-positive close {} on {}",
                bad.close, bad.date
            )));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_bivariate(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.sentiment.is_some())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.close).collect()
    }

    /// Same records with the sentiment channel dropped.
    pub fn univariate(&self) -> RawSeries {
        RawSeries {
            records: self
                .records
                .iter()
                .map(|r| Record {
                    sentiment: None,
                    ..*r
                })
                .collect(),
        }
    }

    pub fn write_prices(&self, path: &Path) -> Result<()> {
        let mut out = String::from("date,close\n");
        for r in &self.records {
            out.push_str(&format!("{},{}\n", r.date.format("%Y-%m-%d"), r.close));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn write_sentiment(&self, path: &Path) -> Result<()> {
        let mut out = String::from("date,sentiment\n");
        for r in &self.records {
            if let Some(s) = r.sentiment {
                out.push_str(&format!("{},{}\n", r.date.format("%Y-%m-%d"), s));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn parse_two_column<R: Read>(
    reader: R,
    file: &str,
    value_column: &str,
) -> Result<Vec<(NaiveDate, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        file: file.to_string(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != value_column {
        return Err(parse_err(
            1,
            format!("expected header `date,{value_column}`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{}`: {e}", &rec[0])))?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|e| parse_err(line, format!("bad {value_column} `{}`: {e}", &rec[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite {value_column}")));
        }
        rows.push((date, value));
    }
    Ok(rows)
}

/// Parses a `date,close` table. Closes must be strictly positive.
pub fn parse_prices<R: Read>(reader: R, file: &str) -> Result<Vec<(NaiveDate, f64)>> {
    let rows = parse_two_column(reader, file, "close")?;
    // data rows start on line 2
    if let Some((i, (_, c))) = rows.iter().enumerate().find(|(_, (_, c))| *c <= 0.0) {
        return Err(Error::Parse {
            file: file.to_string(),
            line: i + 2,
            message: format!("non-positive close {c}"),
        });
    }
    Ok(rows)
}

pub fn parse_sentiment<R: Read>(reader: R, file: &str) -> Result<Vec<(NaiveDate, f64)>> {
    parse_two_column(reader, file, "sentiment")
}

/// Reads the price file and, when given, inner-joins the sentiment file on
/// date.
pub fn ingest(prices: &Path, sentiment: Option<&Path>) -> Result<RawSeries> {
    let name = prices.display().to_string();
    let price_rows = parse_prices(std::fs::File::open(prices)?, &name)?;
    let sentiment_rows = match sentiment {
        Some(path) => Some(parse_sentiment(
            std::fs::File::open(path)?,
            &path.display().to_string(),
        )?),
        None => None,
    };
    join(price_rows, sentiment_rows)
}

pub(crate) fn join(
    prices: Vec<(NaiveDate, f64)>,
    sentiment: Option<Vec<(NaiveDate, f64)>>,
) -> Result<RawSeries> {
    let records: Vec<Record> = match sentiment {
        None => prices
            .into_iter()
            .map(|(date, close)| Record {
                date,
                close,
                sentiment: None,
            })
            .collect(),
        Some(sent) => {
            let mut by_date = BTreeMap::new();
            for (d, s) in sent {
                if by_date.insert(d, s).is_some() {
                    return Err(Error::Data(format!("duplicate sentiment date {d}")));
                }
            }
            prices
                .into_iter()
                .filter_map(|(date, close)| {
                    by_date.get(&date).map(|s| Record {
                        date,
                        close,
                        sentiment: Some(*s),
                    })
                })
                .collect()
        }
    };
    if records.is_empty() {
        return Err(Error::Data("no records after joining price and sentiment".into()));
    }
    RawSeries::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn price_csv(n: usize) -> String {
        let mut s = String::from("date,close\n");
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        for i in 0..n {
            s.push_str(&format!("{},{}\n", start + chrono::Days::new(i as u64), 100.0 + i as f64));
        }
        s
    }

    #[test]
    fn price_only() {
        let rows = parse_prices(price_csv(10).as_bytes(), "p.csv").unwrap();
        let series = join(rows, None).unwrap();
        assert_eq!(series.len(), 10);
        assert!(!series.is_bivariate());
    }

    #[test]
    fn inner_join() {
        let prices = parse_prices(price_csv(10).as_bytes(), "p.csv").unwrap();
        let mut sent = String::from("date,sentiment\n");
        let start = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        for i in 0..10 {
            sent.push_str(&format!("{},0.{i}\n", start + chrono::Days::new(i)));
        }
        let sent = parse_sentiment(sent.as_bytes(), "s.csv").unwrap();
        let series = join(prices, Some(sent)).unwrap();
        assert_eq!(series.len(), 8);
        assert!(series.is_bivariate());
    }

    #[test]
    fn rejects_non_positive_close_with_line() {
        let csv = "date,close\n2020-01-01,10\n2020-01-02,0\n";
        match parse_prices(csv.as_bytes(), "p.csv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn reports_unparseable_line() {
        let csv = "date,close\n2020-01-01,10\n2020-01-02,abc\n";
        match parse_prices(csv.as_bytes(), "p.csv").unwrap_err() {
            Error::Parse { line, file, .. } => {
                assert_eq!(line, 3);
                assert_eq!(file, "p.csv");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(parse_prices("day,close\n".as_bytes(), "p.csv").is_err());
    }

    #[test]
    fn empty_join_is_error() {
        let prices = parse_prices(price_csv(3).as_bytes(), "p").unwrap();
        let sent = vec![(NaiveDate::from_ymd_opt(1999, 1, 1).unwrap(), 0.1)];
        assert!(join(prices, Some(sent)).is_err());
    }
}
