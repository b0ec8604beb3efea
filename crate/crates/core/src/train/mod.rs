//! Objective, optimizer, training loop, walk-forward cross-validation,
//! grid sampling, metrics, reports and checkpoints.

mod checkpoint;
mod cv;
mod fit;
pub mod hyper;
mod metrics;
mod optim;
mod report;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use cv::{fold_ranges, ts_cross_validate, CvResult};
pub use fit::{fit, train, EpochRecord, FitOutcome, TrainOptions, TrainResult};
pub use hyper::{baseline_grid, sample_hyper_dicts, BaselineHyper, HyperDict, RimHyper};
pub use metrics::{evaluate, mape_per_step, mse_mae, SplitMetrics};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use report::{
    emit_report, parse_report, ExperimentReport, MapeTable, ModelReport, ReportFormat, SplitEntry,
    Timings,
};
