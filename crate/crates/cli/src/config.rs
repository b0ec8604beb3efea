//! TOML experiment files. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use alpha_rim::data::{generate_synthetic, ingest, RawSeries, SplitSpec, SynthSpec, DEFAULT_KERNEL_WIDTH};
use alpha_rim::model::{ModelConfig, ModelKind};
use alpha_rim::train::TrainOptions;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    /// Omitted: the desk-scale default for the model kind given on the
    /// command line.
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub training: TrainOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// `date,close` file; synthetic data is generated when absent.
    pub prices: Option<PathBuf>,
    /// `date,sentiment` file.
    pub sentiment: Option<PathBuf>,
    pub synthetic: SynthSpec,
    pub lookback: usize,
    pub bivariate: bool,
    pub kernel_width: usize,
    pub split: SplitConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            prices: None,
            sentiment: None,
            synthetic: SynthSpec::default(),
            lookback: 10,
            bivariate: true,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            split: SplitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitConfig {
    /// Leading fractions of the series for training and validation; the
    /// rest is the test period.
    Fraction { train: f64, validation: f64 },
    /// The 2015-2021 equity periods with the spring 2020 gap removed.
    Equity,
    Dates(SplitSpec),
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::Fraction {
            train: 0.7,
            validation: 0.15,
        }
    }
}

impl SplitConfig {
    pub fn resolve(&self, series: &RawSeries) -> Result<SplitSpec> {
        Ok(match self {
            SplitConfig::Fraction { train, validation } => {
                SplitSpec::by_fraction(series, *train, *validation)?
            }
            SplitConfig::Equity => SplitSpec::equity_2015_2021(),
            SplitConfig::Dates(spec) => spec.clone(),
        })
    }
}

impl DataConfig {
    pub fn load_series(&self) -> Result<RawSeries> {
        match &self.prices {
            Some(prices) => {
                let sentiment = if self.bivariate { self.sentiment.as_deref() } else { None };
                Ok(ingest(prices, sentiment)
                    .with_context(|| format!("reading {}", prices.display()))?)
            }
            None => Ok(generate_synthetic(&self.synthetic)?),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// The configured model, or the default for `kind`, shaped to the data.
    pub fn model_for(&self, kind: Option<ModelKind>) -> Result<ModelConfig> {
        let features = if self.data.bivariate { 2 } else { 1 };
        let cfg = match (&self.model, kind) {
            (Some(m), Some(k)) if m.kind() != k => {
                anyhow::bail!("config describes a {} model but {} was requested", m.kind(), k)
            }
            (Some(m), _) => m.clone(),
            (None, k) => ModelConfig::desk_default(k.unwrap_or(ModelKind::AlphaTRim), 10, 1),
        };
        let cfg = cfg.with_window(self.data.lookback, features);
        cfg.validate()?;
        Ok(cfg)
    }
}
