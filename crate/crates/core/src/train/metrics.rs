use serde::{Deserialize, Serialize};

use crate::data::{rescale, WindowedDataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::Forecaster;

/// Normalized-scale errors and re-scaled per-step MAPE on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mse: f64,
    pub mae: f64,
    /// Percent, one entry per step ahead.
    pub mape: Vec<f64>,
}

fn check_pairs(predictions: &[Vec<f64>], actuals: &[Vec<f64>]) -> Result<usize> {
    if predictions.is_empty() || predictions.len() != actuals.len() {
        return Err(Error::Length {
            op: "metric rows",
            left: predictions.len(),
            right: actuals.len(),
        });
    }
    let width = actuals[0].len();
    for (p, a) in predictions.iter().zip(actuals) {
        if p.len() != width || a.len() != width {
            return Err(Error::Length {
                op: "metric columns",
                left: p.len(),
                right: a.len(),
            });
        }
    }
    Ok(width)
}

/// Mean squared and mean absolute error over every entry.
pub fn mse_mae(predictions: &[Vec<f64>], actuals: &[Vec<f64>]) -> Result<(f64, f64)> {
    let width = check_pairs(predictions, actuals)?;
    let n = (predictions.len() * width) as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, a) in predictions.iter().zip(actuals) {
        for (x, y) in p.iter().zip(a) {
            se += (x - y).powi(2);
            ae += (x - y).abs();
        }
    }
    Ok((se / n, ae / n))
}

/// `100 · mean_n |a − p| / a` separately for each column.
pub fn mape_per_step(predictions: &[Vec<f64>], actuals: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = check_pairs(predictions, actuals)?;
    let mut out = vec![0.0; width];
    for (p, a) in predictions.iter().zip(actuals) {
        for s in 0..width {
            if !(a[s] > 0.0) {
                return Err(Error::Data(format!(
                    "MAPE needs strictly positive actuals, got {}",
                    a[s]
                )));
            }
            out[s] += (a[s] - p[s]).abs() / a[s];
        }
    }
    let n = predictions.len() as f64;
    Ok(out.into_iter().map(|v| 100.0 * v / n).collect())
}

pub fn evaluate(model: &Forecaster, data: &WindowedDataset, exec: Execution) -> Result<SplitMetrics> {
    let predictions = model.predict_all(&data.inputs, exec)?;
    let (mse, mae) = mse_mae(&predictions, &data.targets)?;
    let back = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().map(|z| rescale(*z, &data.norm_stats)).collect())
            .collect()
    };
    let mape = mape_per_step(&back(&predictions), &back(&data.targets))?;
    Ok(SplitMetrics { mse, mae, mape })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mape_examples() {
        let a = vec![vec![100.0; 5]; 3];
        assert_eq!(mape_per_step(&a, &a).unwrap(), vec![0.0; 5]);
        let p = vec![vec![110.0; 5]; 3];
        for v in mape_per_step(&p, &a).unwrap() {
            assert!((v - 10.0).abs() < 1e-12);
        }
        let got = mape_per_step(&[vec![110.0], vec![190.0]], &[vec![100.0], vec![200.0]]).unwrap();
        assert!((got[0] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn zero_actual_rejected() {
        assert!(mape_per_step(&[vec![1.0]], &[vec![0.0]]).is_err());
    }

    #[test]
    fn mse_mae_simple() {
        let (mse, mae) = mse_mae(&[vec![1.0, 0.0]], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!((mse, mae), (0.5, 0.5));
    }
}
