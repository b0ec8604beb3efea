//! Price/sentiment ingestion, leakage-free transforms, windowing and a
//! synthetic non-stationary series generator.

mod series;
mod split;
mod synth;
mod transform;
mod window;

pub use series::{ingest, parse_prices, parse_sentiment, RawSeries, Record};
pub use split::{DateRange, SplitKind, SplitSpec};
pub use synth::{generate_synthetic, SynthSpec};
pub use transform::{
    kernel_smooth, log_then_standardize, rescale, triangular_kernel, NormStats, TransformedSeries,
    DEFAULT_KERNEL_WIDTH,
};
pub use window::{make_windows, prepare, PipelineOptions, PreparedData, WindowMeta, WindowedDataset, ALLOWED_LOOKBACKS};
