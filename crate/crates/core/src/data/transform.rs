use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{RawSeries, SplitKind, SplitSpec};

pub const DEFAULT_KERNEL_WIDTH: usize = 7;

/// Causal triangular weights `w_j ∝ width − j`, summing to 1.
pub fn triangular_kernel(width: usize) -> Vec<f64> {
    let width = width.max(1);
    let total = (width * (width + 1) / 2) as f64;
    (0..width).map(|j| (width - j) as f64 / total).collect()
}

/// Causal convolution `y_t = Σ_j k_j x_{t−j}`; the first `L − 1` outputs are
/// renormalized over the history that exists.
pub fn kernel_smooth(values: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if kernel.is_empty() || kernel.iter().any(|k| *k < 0.0 || !k.is_finite()) {
        return Err(Error::Config("kernel weights must be finite and non-negative".into()));
    }
    let total: f64 = kernel.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config("kernel weights sum to zero".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for t in 0..values.len() {
        let reach = kernel.len().min(t + 1);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for (j, k) in kernel.iter().take(reach).enumerate() {
            acc += k * values[t - j];
            mass += k;
        }
        out.push(if mass > 0.0 { acc / mass } else { values[t] });
    }
    Ok(out)
}

/// Per-feature training-period mean and standard deviation. Feature 0 is
/// the log close; feature 1 (when present) the smoothed sentiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Maps a standardized log price back to a price.
pub fn rescale(z: f64, stats: &NormStats) -> f64 {
    (z * stats.std[0] + stats.mean[0]).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSeries {
    pub dates: Vec<NaiveDate>,
    /// One row per date, one column per feature.
    pub values: Vec<Vec<f64>>,
    /// Split of each row; `None` for excluded or unassigned dates.
    pub splits: Vec<Option<SplitKind>>,
}

impl TransformedSeries {
    pub fn features(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Log-transforms closes and standardizes every feature with statistics from
/// the training period only. Sentiment, when present and `kernel` is given,
/// is smoothed causally before standardization.
pub fn log_then_standardize(
    series: &RawSeries,
    split: &SplitSpec,
    kernel: Option<&[f64]>,
    use_sentiment: bool,
) -> Result<(TransformedSeries, NormStats)> {
    split.validate()?;
    if use_sentiment && !series.is_bivariate() {
        return Err(Error::Data("sentiment requested but the series has none".into()));
    }
    let dates = series.dates();
    let splits: Vec<Option<SplitKind>> = dates.iter().map(|d| split.assign(*d)).collect();
    let train_idx: Vec<usize> = (0..dates.len())
        .filter(|&i| splits[i] == Some(SplitKind::Train))
        .collect();
    if train_idx.is_empty() {
        return Err(Error::Data("training period contains no rows".into()));
    }

    let mut channels: Vec<Vec<f64>> = vec![series.closes().iter().map(|c| c.ln()).collect()];
    if use_sentiment {
        let raw: Vec<f64> = series
            .records()
            .iter()
            .map(|r| r.sentiment.expect("checked bivariate"))
            .collect();
        channels.push(match kernel {
            Some(k) => kernel_smooth(&raw, k)?,
            None => raw,
        });
    }

    let mut stats = NormStats {
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (f, channel) in channels.iter_mut().enumerate() {
        let train: Vec<f64> = train_idx.iter().map(|&i| channel[i]).collect();
        let (mean, std) = mean_std(&train);
        // rounding leaves a constant channel with std of order 1e-16, not 0
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::Data(format!(
                "feature {f} has zero variance over the training period"
            )));
        }
        channel.iter_mut().for_each(|v| *v = (*v - mean) / std);
        stats.mean.push(mean);
        stats.std.push(std);
    }
    let values = (0..dates.len())
        .map(|i| channels.iter().map(|c| c[i]).collect())
        .collect();
    Ok((
        TransformedSeries {
            dates,
            values,
            splits,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DateRange, Record};

    #[test]
    fn identity_kernel() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(kernel_smooth(&x, &[1.0]).unwrap(), x.to_vec());
    }

    #[test]
    fn two_tap_average() {
        assert_eq!(
            kernel_smooth(&[0.0, 2.0, 4.0], &[0.5, 0.5]).unwrap(),
            vec![0.0, 1.0, 3.0]
        );
    }

    #[test]
    fn constant_preserved() {
        let x = vec![2.5; 20];
        for k in [triangular_kernel(7), vec![0.2, 0.3, 0.5], vec![0.0, 1.0]] {
            let y = kernel_smooth(&x, &k).unwrap();
            assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
    }

    #[test]
    fn zero_sum_kernel_rejected() {
        assert!(kernel_smooth(&[1.0], &[0.0, 0.0]).is_err());
        assert!(kernel_smooth(&[1.0], &[-0.5, 1.5]).is_err());
    }

    #[test]
    fn triangular_weights() {
        let k = triangular_kernel(3);
        assert_eq!(k, vec![0.5, 1.0 / 3.0, 1.0 / 6.0]);
    }

    fn series(closes: &[f64]) -> RawSeries {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        RawSeries::new(
            closes
                .iter()
                .enumerate()
                .map(|(i, c)| Record {
                    date: start + chrono::Days::new(i as u64),
                    close: *c,
                    sentiment: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Days::new(i)
    }

    #[test]
    fn constant_training_prices_rejected() {
        let s = series(&[5.0, 5.0, 5.0, 6.0, 7.0, 8.0]);
        let split = SplitSpec::new(
            DateRange::new(day(0), day(2)),
            DateRange::new(day(3), day(3)),
            DateRange::new(day(4), day(5)),
        )
        .unwrap();
        assert!(log_then_standardize(&s, &split, None, false).is_err());
    }

    #[test]
    fn centering_on_train_mean() {
        let e = std::f64::consts::E;
        let s = series(&[1.0, e * e, e, 3.0, 4.0]);
        let split = SplitSpec::new(
            DateRange::new(day(0), day(1)),
            DateRange::new(day(2), day(2)),
            DateRange::new(day(3), day(4)),
        )
        .unwrap();
        let (t, stats) = log_then_standardize(&s, &split, None, false).unwrap();
        assert!((stats.mean[0] - 1.0).abs() < 1e-15);
        assert!((stats.std[0] - 1.0).abs() < 1e-15);
        // log(e) = 1 sits exactly on the training mean
        assert!(t.values[2][0].abs() < 1e-15);
        assert!((rescale(0.0, &stats) - e).abs() < 1e-14);
    }

    #[test]
    fn rescale_fixed_points() {
        let stats = NormStats {
            mean: vec![0.0],
            std: vec![1.0],
        };
        assert!((rescale(100f64.ln(), &stats) - 100.0).abs() < 1e-10);
    }
}
