//! Forecasting with sparsely activated recurrent modules whose transitions
//! are exponentially smoothed RNNs (α_t-RIM), together with simple RNN and
//! LSTM baselines, a price/sentiment data pipeline and a training harness.

pub mod attention;
pub mod cells;
pub mod data;
pub mod error;
pub mod exec;
pub mod gradcheck;
pub mod init;
pub mod matrix;
pub mod model;
pub mod params;
pub mod rim;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::Matrix;
pub use rng::SeededRng;
