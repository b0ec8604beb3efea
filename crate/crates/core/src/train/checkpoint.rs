use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::model::{Forecaster, ModelConfig, ModelParams};
use crate::params::{load_named, named_tensors, NamedTensor};
use crate::rng::SeededRng;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    pub norm_stats: Option<NormStats>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn capture(model: &Forecaster, seed: u64, norm_stats: Option<NormStats>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            seed,
            config: model.config.clone(),
            norm_stats,
            tensors: named_tensors(&model.params),
        }
    }

    /// Rebuilds the model. With `expected`, the stored configuration must
    /// match it exactly.
    pub fn restore(&self, expected: Option<&ModelConfig>) -> Result<Forecaster> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if let Some(cfg) = expected {
            if cfg != &self.config {
                return Err(Error::Checkpoint(
                    "stored configuration differs from the requested one".into(),
                ));
            }
        }
        let mut params = ModelParams::init(&self.config, &mut SeededRng::new(0))?;
        load_named(&mut params, &self.tensors)?;
        Ok(Forecaster {
            config: self.config.clone(),
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
