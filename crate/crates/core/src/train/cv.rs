use std::ops::Range;

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

use super::fit::{fit, TrainOptions};
use super::metrics::mse_mae;

/// Expanding-window folds over `n` ordered samples split into `folds + 1`
/// equal segments. Fold `i` trains on segments `0..=i` and validates on
/// segment `i + 1`; the last validation segment absorbs any remainder.
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<(Range<usize>, Range<usize>)>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let segment = n / (folds + 1);
    if segment == 0 {
        return Err(Error::Data(format!(
            "{n} samples cannot form {} segments",
            folds + 1
        )));
    }
    Ok((1..=folds)
        .map(|i| {
            let end = if i == folds { n } else { (i + 1) * segment };
            (0..i * segment, i * segment..end)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_index: usize,
    pub best: ModelConfig,
    /// Mean validation MSE per candidate; empty when there was nothing to
    /// compare. Diverged candidates score `+inf`.
    pub scores: Vec<f64>,
}

/// Walk-forward cross-validation over `candidates`, which are evaluated
/// concurrently. Ties go to the earlier candidate.
pub fn ts_cross_validate(
    candidates: &[ModelConfig],
    data: &WindowedDataset,
    folds: usize,
    opts: &TrainOptions,
) -> Result<CvResult> {
    let Some(first) = candidates.first() else {
        return Err(Error::Config("empty hyperparameter grid".into()));
    };
    let ranges = fold_ranges(data.len(), folds)?;
    if candidates.len() == 1 {
        return Ok(CvResult {
            best_index: 0,
            best: first.clone(),
            scores: Vec::new(),
        });
    }
    let fold_opts = TrainOptions {
        patience: None,
        ..opts.clone()
    };
    let scored = opts.execution.map(candidates, |_, cand| -> Result<f64> {
        let mut total = 0.0;
        for (train, val) in &ranges {
            let train_set = data.slice(train.clone());
            let val_set = data.slice(val.clone());
            let fitted = match fit(cand, &train_set, None, &fold_opts) {
                Ok(f) => f,
                Err(Error::Diverged { .. }) => return Ok(f64::INFINITY),
                Err(e) => return Err(e),
            };
            let preds = fitted.forecaster.predict_all(&val_set.inputs, opts.execution)?;
            total += mse_mae(&preds, &val_set.targets)?.0;
        }
        let mean = total / ranges.len() as f64;
        Ok(if mean.is_finite() { mean } else { f64::INFINITY })
    });
    let scores = scored.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best_index] {
            best_index = i;
        }
    }
    Ok(CvResult {
        best_index,
        best: candidates[best_index].clone(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_segments() {
        let f = fold_ranges(300, 2).unwrap();
        assert_eq!(f, vec![(0..100, 100..200), (0..200, 200..300)]);
    }

    #[test]
    fn remainder_goes_to_last_validation() {
        let f = fold_ranges(103, 2).unwrap();
        assert_eq!(f[1], (0..68, 68..103));
    }

    #[test]
    fn too_small() {
        assert!(fold_ranges(2, 2).is_err());
        assert!(fold_ranges(100, 1).is_err());
    }
}
