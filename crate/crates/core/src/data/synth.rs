use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::{RawSeries, Record};

/// Parameters of the synthetic price and sentiment generator.
///
/// Log price is `ln(start_price) + trend·t + A·sin(2πt/period) + regime step
/// + AR(1) noise`. Sentiment at `t` is the standardized log-return over the
/// next `sentiment_lead` rows scaled by `sentiment_strength`, plus
/// independent unit noise scaled by `sentiment_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub length: usize,
    pub start_date: NaiveDate,
    pub start_price: f64,
    pub trend: f64,
    pub seasonal_amplitude: f64,
    pub seasonal_period: f64,
    /// Position of the regime shift as a fraction of `length`.
    pub regime_at: f64,
    pub regime_magnitude: f64,
    pub noise_sigma: f64,
    pub ar_coefficient: f64,
    pub sentiment_lead: usize,
    pub sentiment_strength: f64,
    pub sentiment_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            length: 1600,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            start_price: 100.0,
            trend: 1e-4,
            seasonal_amplitude: 0.04,
            seasonal_period: 63.0,
            regime_at: 0.5,
            regime_magnitude: -0.12,
            noise_sigma: 0.012,
            ar_coefficient: 0.95,
            sentiment_lead: 5,
            sentiment_strength: 1.0,
            sentiment_noise: 1.0,
            seed: 7,
        }
    }
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<RawSeries> {
    if spec.length < 100 {
        return Err(Error::Config(format!(
            "synthetic length {} is below the minimum of 100",
            spec.length
        )));
    }
    if !(spec.start_price > 0.0) || !(spec.seasonal_period > 0.0) {
        return Err(Error::Config(
            "start price and seasonal period must be positive".into(),
        ));
    }
    let lead = spec.sentiment_lead.max(1);
    let total = spec.length + lead;
    let rng = SeededRng::new(spec.seed);
    let mut noise_rng = rng.fork(1);
    let mut sentiment_rng = rng.fork(2);

    let shift = (spec.regime_at * spec.length as f64).round() as usize;
    let mut ar = 0.0;
    let log_price: Vec<f64> = (0..total)
        .map(|t| {
            ar = spec.ar_coefficient * ar + spec.noise_sigma * noise_rng.normal();
            let tf = t as f64;
            let seasonal = spec.seasonal_amplitude
                * (2.0 * std::f64::consts::PI * tf / spec.seasonal_period).sin();
            let regime = if t >= shift { spec.regime_magnitude } else { 0.0 };
            spec.start_price.ln() + spec.trend * tf + seasonal + regime + ar
        })
        .collect();

    let future: Vec<f64> = (0..spec.length)
        .map(|t| log_price[t + lead] - log_price[t])
        .collect();
    let n = future.len() as f64;
    let mean = future.iter().sum::<f64>() / n;
    let std = (future.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let dates = business_days(spec.start_date, spec.length);
    let records = (0..spec.length)
        .map(|t| {
            let z = if std > 0.0 { (future[t] - mean) / std } else { 0.0 };
            Record {
                date: dates[t],
                close: log_price[t].exp(),
                sentiment: Some(
                    spec.sentiment_strength * z + spec.sentiment_noise * sentiment_rng.normal(),
                ),
            }
        })
        .collect();
    RawSeries::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_series() {
        let spec = SynthSpec::default();
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn noiseless_curve() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            sentiment_strength: 0.0,
            regime_magnitude: 0.0,
            length: 200,
            ..SynthSpec::default()
        };
        let s = generate_synthetic(&spec).unwrap();
        for (t, c) in s.closes().iter().enumerate() {
            let tf = t as f64;
            let expected = (100f64.ln()
                + spec.trend * tf
                + spec.seasonal_amplitude * (2.0 * std::f64::consts::PI * tf / 63.0).sin())
            .exp();
            assert!((c - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn weekdays_only() {
        let s = generate_synthetic(&SynthSpec::default()).unwrap();
        assert_eq!(s.len(), 1600);
        assert!(s
            .dates()
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn short_length_rejected() {
        let spec = SynthSpec {
            length: 99,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }
}
