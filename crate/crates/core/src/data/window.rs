use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rim::HORIZON;

use super::{log_then_standardize, triangular_kernel, NormStats, RawSeries, SplitKind, SplitSpec, TransformedSeries};

pub const ALLOWED_LOOKBACKS: [usize; 3] = [5, 10, 21];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub input_start: NaiveDate,
    /// Last input date; the forecast is made from here.
    pub origin: NaiveDate,
    pub target_start: NaiveDate,
    pub target_end: NaiveDate,
}

/// Lagged input windows with the following `horizon` standardized log
/// prices as targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Vec<Matrix>,
    pub targets: Vec<Vec<f64>>,
    pub meta: Vec<WindowMeta>,
    pub norm_stats: NormStats,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::cols)
    }

    pub fn lookback(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    pub fn horizon(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    /// Contiguous sub-range of windows.
    pub fn slice(&self, range: std::ops::Range<usize>) -> WindowedDataset {
        WindowedDataset {
            inputs: self.inputs[range.clone()].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            meta: self.meta[range].to_vec(),
            norm_stats: self.norm_stats.clone(),
        }
    }

    fn extend(&mut self, other: WindowedDataset) {
        self.inputs.extend(other.inputs);
        self.targets.extend(other.targets);
        self.meta.extend(other.meta);
    }
}

fn check_lookback(lookback: usize) -> Result<()> {
    if ALLOWED_LOOKBACKS.contains(&lookback) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "lookback {lookback} not one of {ALLOWED_LOOKBACKS:?}"
        )))
    }
}

/// Stride-1 sliding windows over a contiguous transformed series.
pub fn make_windows(
    series: &TransformedSeries,
    stats: &NormStats,
    lookback: usize,
    horizon: usize,
) -> Result<WindowedDataset> {
    check_lookback(lookback)?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let n = series.values.len();
    if n < lookback + horizon {
        return Err(Error::Data(format!(
            "series of length {n} is shorter than lookback {lookback} + horizon {horizon}"
        )));
    }
    build(series, stats, 0..n, lookback, horizon)
}

fn build(
    series: &TransformedSeries,
    stats: &NormStats,
    rows: std::ops::Range<usize>,
    lookback: usize,
    horizon: usize,
) -> Result<WindowedDataset> {
    let mut out = WindowedDataset {
        inputs: Vec::new(),
        targets: Vec::new(),
        meta: Vec::new(),
        norm_stats: stats.clone(),
    };
    let features = series.features();
    let len = rows.len();
    if len < lookback + horizon {
        return Ok(out);
    }
    for start in rows.start..=rows.end - lookback - horizon {
        let origin = start + lookback - 1;
        let data: Vec<f64> = series.values[start..=origin].iter().flatten().copied().collect();
        out.inputs.push(Matrix::new(lookback, features, data)?);
        out.targets.push(
            series.values[origin + 1..=origin + horizon]
                .iter()
                .map(|v| v[0])
                .collect(),
        );
        out.meta.push(WindowMeta {
            input_start: series.dates[start],
            origin: series.dates[origin],
            target_start: series.dates[origin + 1],
            target_end: series.dates[origin + horizon],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOptions {
    pub lookback: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Use the sentiment channel as a second feature.
    pub bivariate: bool,
    /// Width of the causal triangular sentiment kernel; 1 disables smoothing.
    #[serde(default = "default_kernel_width")]
    pub kernel_width: usize,
}

fn default_horizon() -> usize {
    HORIZON
}

fn default_kernel_width() -> usize {
    super::DEFAULT_KERNEL_WIDTH
}

impl PipelineOptions {
    pub fn new(lookback: usize, bivariate: bool) -> Self {
        Self {
            lookback,
            horizon: HORIZON,
            bivariate,
            kernel_width: super::DEFAULT_KERNEL_WIDTH,
        }
    }

    pub fn features(&self) -> usize {
        if self.bivariate {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: WindowedDataset,
    pub validation: WindowedDataset,
    pub test: WindowedDataset,
    pub stats: NormStats,
}

impl PreparedData {
    pub fn split(&self, kind: SplitKind) -> &WindowedDataset {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }
}

/// Transform, then window each split separately. Windows never cross a
/// split boundary or an excluded range.
pub fn prepare(raw: &RawSeries, split: &SplitSpec, opts: &PipelineOptions) -> Result<PreparedData> {
    check_lookback(opts.lookback)?;
    let kernel = triangular_kernel(opts.kernel_width);
    let (series, stats) = log_then_standardize(raw, split, Some(&kernel), opts.bivariate)?;
    let mut sets = Vec::with_capacity(3);
    for kind in SplitKind::ALL {
        let mut set = WindowedDataset {
            inputs: Vec::new(),
            targets: Vec::new(),
            meta: Vec::new(),
            norm_stats: stats.clone(),
        };
        let mut i = 0;
        while i < series.splits.len() {
            if series.splits[i] != Some(kind) {
                i += 1;
                continue;
            }
            let start = i;
            while i < series.splits.len() && series.splits[i] == Some(kind) {
                i += 1;
            }
            set.extend(build(&series, &stats, start..i, opts.lookback, opts.horizon)?);
        }
        if set.is_empty() {
            return Err(Error::Data(format!(
                "{} split yields no windows for lookback {} and horizon {}",
                kind.label(),
                opts.lookback,
                opts.horizon
            )));
        }
        sets.push(set);
    }
    let test = sets.pop().expect("three splits");
    let validation = sets.pop().expect("three splits");
    let train = sets.pop().expect("three splits");
    Ok(PreparedData {
        train,
        validation,
        test,
        stats,
    })
}
