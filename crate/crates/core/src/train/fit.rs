use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{PreparedData, SplitKind, WindowedDataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{Forecaster, ModelConfig, ModelParams};
use crate::params::{add_scaled, all_finite, l1_norm, scale, zeros_like};
use crate::rng::SeededRng;

use super::metrics::{evaluate, mse_mae};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::report::{ModelReport, SplitEntry, Timings};

const SHUFFLE_STREAM: u64 = 0x5348;
const DROPOUT_STREAM: u64 = 0x4452;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a validation improvement.
    /// `None` trains for the full budget.
    pub patience: Option<usize>,
    pub adam: AdamConfig,
    #[serde(skip)]
    pub execution: Execution,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            patience: Some(20),
            adam: AdamConfig::default(),
            execution: Execution::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's mini-batches.
    pub train_objective: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub forecaster: Forecaster,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when validation drove selection.
    pub best_epoch: Option<usize>,
}

fn dataset_mse(model: &Forecaster, data: &WindowedDataset, exec: Execution) -> Result<f64> {
    let preds = model.predict_all(&data.inputs, exec)?;
    Ok(mse_mae(&preds, &data.targets)?.0)
}

/// Mini-batch Adam on `train`. Per-sample gradients within a batch are
/// computed with `opts.execution` and summed in sample order, so the result
/// does not depend on the execution mode. With a non-empty `validation`
/// set the parameters of the best validation epoch are restored.
pub fn fit(
    config: &ModelConfig,
    train: &WindowedDataset,
    validation: Option<&WindowedDataset>,
    opts: &TrainOptions,
) -> Result<FitOutcome> {
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut model = Forecaster::new(config.clone(), opts.seed)?;
    let validation = validation.filter(|v| !v.is_empty());
    let root = SeededRng::new(opts.seed);
    let mut adam = AdamState::new(&model.params, opts.adam);
    let mut history = Vec::with_capacity(opts.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0;
    let mut last_finite = None;
    let l1 = config.l1();

    for epoch in 1..=opts.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        root.fork(SHUFFLE_STREAM).fork(epoch as u64).shuffle(&mut order);
        let dropout = root.fork(DROPOUT_STREAM).fork(epoch as u64);
        let mut objective_sum = 0.0;
        let mut batches = 0;
        for (b, batch) in order.chunks(opts.batch_size).enumerate() {
            let stream = dropout.fork(b as u64);
            let current = &model;
            let samples = opts.execution.map(batch, |pos, &i| {
                let mut rng = stream.fork(pos as u64);
                current.sample_grad(&train.inputs[i], &train.targets[i], &mut rng)
            });
            let mut total = zeros_like(&model.params);
            let mut mse = 0.0;
            for s in samples {
                let s = s?;
                mse += s.mse;
                add_scaled(&mut total, &s.grads, 1.0);
            }
            let n = batch.len() as f64;
            scale(&mut total, 1.0 / n);
            let objective = mse / n + if l1 == 0.0 { 0.0 } else { l1 * l1_norm(&model.params) };
            if !objective.is_finite() || !all_finite(&total) {
                return Err(Error::Diverged { epoch, last_finite });
            }
            adam_step(&mut model.params, &total, &mut adam)?;
            if !all_finite(&model.params) {
                return Err(Error::Diverged { epoch, last_finite });
            }
            objective_sum += objective;
            batches += 1;
        }
        last_finite = Some(epoch);

        let val_mse = match validation {
            Some(v) => Some(dataset_mse(&model, v, opts.execution)?),
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            train_objective: objective_sum / batches as f64,
            val_mse,
        });
        if let Some(score) = val_mse {
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, epoch, model.params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if opts.patience.is_some_and(|p| since_best >= p) {
                    break;
                }
            }
        }
    }

    let best_epoch = best.map(|(_, epoch, params)| {
        model.params = params;
        epoch
    });
    Ok(FitOutcome {
        forecaster: model,
        history,
        best_epoch,
    })
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub forecaster: Forecaster,
    pub history: Vec<EpochRecord>,
    pub report: ModelReport,
}

/// Fits on the training split with validation-based early stopping, then
/// scores every split.
pub fn train(config: &ModelConfig, data: &PreparedData, opts: &TrainOptions) -> Result<TrainResult> {
    let lookback = data.train.lookback();
    let features = data.train.features();
    if config.lookback() != lookback || config.features() != features {
        return Err(Error::Config(format!(
            "model expects {}x{} windows, data provides {lookback}x{features}",
            config.lookback(),
            config.features()
        )));
    }
    let started = Instant::now();
    let fitted = fit(config, &data.train, Some(&data.validation), opts)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let started = Instant::now();
    let splits = SplitKind::ALL
        .iter()
        .map(|&split| {
            Ok(SplitEntry {
                split,
                metrics: evaluate(&fitted.forecaster, data.split(split), opts.execution)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ModelReport {
        name: config.kind().label().to_string(),
        config: config.clone(),
        seed: opts.seed,
        epochs_run: fitted.history.len(),
        best_epoch: fitted.best_epoch,
        splits,
        timings: Timings {
            train_seconds,
            eval_seconds: started.elapsed().as_secs_f64(),
        },
    };
    Ok(TrainResult {
        forecaster: fitted.forecaster,
        history: fitted.history,
        report,
    })
}
