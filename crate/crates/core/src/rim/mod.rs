//! Sparsely activated recurrent modules with α_t-RNN transitions.

mod network;

pub use network::{
    backward, backward_from_output, forward, forward_frozen, rim_step, select_active, Decisions,
    Mode, RimState, RimTape, StepDecisions,
};

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionGeometry, AttentionParams};
use crate::cells::AlphaTParams;
use crate::error::{Error, Result};
use crate::init::glorot_uniform;
use crate::matrix::Matrix;
use crate::params::{LeafKind, Parameters};
use crate::rng::SeededRng;

pub const HORIZON: usize = 5;

fn default_one() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_horizon() -> usize {
    HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RimConfig {
    /// Hidden units per module.
    pub units: usize,
    /// Total number of modules.
    pub num_modules: usize,
    /// Modules activated per step; at most `num_modules`.
    pub num_active: usize,
    #[serde(default = "default_one")]
    pub input_heads: usize,
    pub input_key_size: usize,
    pub input_value_size: usize,
    pub input_query_size: usize,
    pub input_keep_prob: f64,
    pub comm_heads: usize,
    pub comm_key_size: usize,
    pub comm_value_size: usize,
    pub comm_query_size: usize,
    pub comm_keep_prob: f64,
    pub lookback: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// 1 (price only) or 2 (price and sentiment).
    pub features: usize,
    #[serde(default = "default_true")]
    pub include_self_in_comm: bool,
}

impl RimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("units", self.units),
            ("num_modules", self.num_modules),
            ("num_active", self.num_active),
            ("input_heads", self.input_heads),
            ("input_key_size", self.input_key_size),
            ("input_value_size", self.input_value_size),
            ("input_query_size", self.input_query_size),
            ("comm_heads", self.comm_heads),
            ("comm_key_size", self.comm_key_size),
            ("comm_value_size", self.comm_value_size),
            ("comm_query_size", self.comm_query_size),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.num_active > self.num_modules {
            return Err(Error::Config(format!(
                "num_active ({}) exceeds num_modules ({})",
                self.num_active, self.num_modules
            )));
        }
        if self.input_query_size != self.input_key_size {
            return Err(Error::Config(format!(
                "input query size {} must equal input key size {}",
                self.input_query_size, self.input_key_size
            )));
        }
        if self.comm_query_size != self.comm_key_size {
            return Err(Error::Config(format!(
                "communication query size {} must equal communication key size {}",
                self.comm_query_size, self.comm_key_size
            )));
        }
        for (name, p) in [
            ("input_keep_prob", self.input_keep_prob),
            ("comm_keep_prob", self.comm_keep_prob),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {p}")));
            }
        }
        if !(1..=2).contains(&self.features) {
            return Err(Error::Config(format!(
                "features must be 1 or 2, got {}",
                self.features
            )));
        }
        Ok(())
    }

    pub fn input_geometry(&self) -> AttentionGeometry {
        AttentionGeometry {
            heads: self.input_heads,
            key_size: self.input_key_size,
            value_size: self.input_value_size,
        }
    }

    pub fn comm_geometry(&self) -> AttentionGeometry {
        AttentionGeometry {
            heads: self.comm_heads,
            key_size: self.comm_key_size,
            value_size: self.comm_value_size,
        }
    }

    /// Width of the attended input each module's cell receives.
    pub fn cell_input(&self) -> usize {
        self.input_heads * self.input_value_size
    }
}

/// Per-module cells, both attention blocks and the affine readout over the
/// concatenated module states.
#[derive(Debug, Clone, PartialEq)]
pub struct RimParams {
    pub cells: Vec<AlphaTParams>,
    pub input_attention: AttentionParams,
    pub communication: AttentionParams,
    /// `horizon x num_modules·units`
    pub readout_w: Matrix,
    /// `1 x horizon`
    pub readout_b: Matrix,
}

impl RimParams {
    pub fn new(cfg: &RimConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let cells = (0..cfg.num_modules)
            .map(|_| AlphaTParams::new(cfg.cell_input(), cfg.units, rng))
            .collect();
        let input_attention = AttentionParams::new(
            cfg.num_modules,
            cfg.units,
            1,
            cfg.input_geometry(),
            false,
            rng,
        )?;
        let communication = AttentionParams::new(
            cfg.num_modules,
            cfg.units,
            cfg.units,
            cfg.comm_geometry(),
            true,
            rng,
        )?;
        Ok(Self {
            cells,
            input_attention,
            communication,
            readout_w: glorot_uniform(cfg.horizon, cfg.num_modules * cfg.units, rng),
            readout_b: Matrix::zeros(1, cfg.horizon),
        })
    }

    pub fn num_modules(&self) -> usize {
        self.cells.len()
    }

    pub fn units(&self) -> usize {
        self.cells[0].w_in.rows()
    }

    /// Zeroes the communication output projection, which turns
    /// communication into a no-op.
    pub fn disable_communication(&mut self) {
        if let Some(o) = self.communication.output.as_mut() {
            o.fill(0.0);
        }
    }

    pub(crate) fn check(&self, cfg: &RimConfig) -> Result<()> {
        let consistent = self.cells.len() == cfg.num_modules
            && self.input_attention.modules() == cfg.num_modules
            && self.communication.modules() == cfg.num_modules
            && self.readout_w.shape() == (cfg.horizon, cfg.num_modules * cfg.units)
            && self.cells.iter().all(|c| c.w_in.shape() == (cfg.units, cfg.cell_input()));
        if consistent {
            Ok(())
        } else {
            Err(Error::Config(
                "parameter blocks disagree with the configuration".into(),
            ))
        }
    }
}

impl Parameters for RimParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        for (k, cell) in self.cells.iter().enumerate() {
            cell.visit(&mut |n, kind, m| f(format!("module.{k}.cell.{n}"), kind, m));
        }
        self.input_attention
            .visit(&mut |n, kind, m| f(format!("input_attention.{n}"), kind, m));
        self.communication
            .visit(&mut |n, kind, m| f(format!("communication.{n}"), kind, m));
        f("readout.W".into(), LeafKind::Weight, &self.readout_w);
        f("readout.b".into(), LeafKind::Bias, &self.readout_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        for (k, cell) in self.cells.iter_mut().enumerate() {
            cell.visit_mut(&mut |n, kind, m| f(format!("module.{k}.cell.{n}"), kind, m));
        }
        self.input_attention
            .visit_mut(&mut |n, kind, m| f(format!("input_attention.{n}"), kind, m));
        self.communication
            .visit_mut(&mut |n, kind, m| f(format!("communication.{n}"), kind, m));
        f("readout.W".into(), LeafKind::Weight, &mut self.readout_w);
        f("readout.b".into(), LeafKind::Bias, &mut self.readout_b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> RimConfig {
        RimConfig {
            units: 3,
            num_modules: 4,
            num_active: 2,
            input_heads: 1,
            input_key_size: 4,
            input_value_size: 4,
            input_query_size: 4,
            input_keep_prob: 0.9,
            comm_heads: 2,
            comm_key_size: 4,
            comm_value_size: 4,
            comm_query_size: 4,
            comm_keep_prob: 0.9,
            lookback: 5,
            horizon: HORIZON,
            features: 2,
            include_self_in_comm: true,
        }
    }

    #[test]
    fn config_constraints() {
        let good = small_config();
        good.validate().unwrap();
        let mut bad = good.clone();
        bad.num_active = 5;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.num_active = 0;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.comm_keep_prob = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.input_query_size = 6;
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.features = 3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn leaf_names_are_paths() {
        let cfg = small_config();
        let p = RimParams::new(&cfg, &mut SeededRng::new(0)).unwrap();
        let names: Vec<String> = crate::params::named_tensors(&p)
            .into_iter()
            .map(|t| t.name)
            .collect();
        assert!(names.contains(&"module.3.cell.W_in".to_string()));
        assert!(names.contains(&"communication.output".to_string()));
        assert!(names.contains(&"input_attention.query.0".to_string()));
        assert_eq!(names.last().unwrap(), "readout.b");
    }
}
