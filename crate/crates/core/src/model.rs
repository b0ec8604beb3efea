//! Forecasting models behind one interface: single-layer RNN and LSTM
//! baselines with an affine horizon readout, and the α_t-RIM.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::dropout_mask;
use crate::cells::{cell_backward, run_sequence, Cell, LstmParams, RnnParams, SequenceTape};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::init::glorot_uniform;
use crate::matrix::Matrix;
use crate::gradcheck::{finite_diff_grad, max_relative_error};
use crate::params::{add_l1_grad, assign_flat, flatten, l1_norm, zeros_like, LeafKind, Parameters};
use crate::rim::{self, Mode, RimConfig, RimParams, HORIZON};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rnn,
    Lstm,
    AlphaTRim,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rnn, ModelKind::Lstm, ModelKind::AlphaTRim];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Rnn => "RNN",
            ModelKind::Lstm => "LSTM",
            ModelKind::AlphaTRim => "alpha_t-RIM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
            ModelKind::AlphaTRim => "alpha_t_rim",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ModelKind::Rnn),
            "lstm" => Ok(ModelKind::Lstm),
            "alpha_t_rim" | "rim" => Ok(ModelKind::AlphaTRim),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

fn default_horizon() -> usize {
    HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub units: usize,
    /// Weight on the L1 penalty over weight matrices.
    #[serde(default)]
    pub l1: f64,
    /// Dropout rate on the final hidden state during training.
    #[serde(default)]
    pub dropout: f64,
    pub lookback: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub features: usize,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units == 0 || self.lookback == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "units, lookback and horizon must be positive".into(),
            ));
        }
        if !(self.l1 >= 0.0 && self.l1.is_finite()) {
            return Err(Error::Config(format!("l1 must be non-negative, got {}", self.l1)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(1..=2).contains(&self.features) {
            return Err(Error::Config(format!(
                "features must be 1 or 2, got {}",
                self.features
            )));
        }
        Ok(())
    }
}

/// Architecture and regularization of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Rnn(BaselineConfig),
    Lstm(BaselineConfig),
    AlphaTRim(RimConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Rnn(_) => ModelKind::Rnn,
            ModelConfig::Lstm(_) => ModelKind::Lstm,
            ModelConfig::AlphaTRim(_) => ModelKind::AlphaTRim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => c.validate(),
            ModelConfig::AlphaTRim(c) => c.validate(),
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => c.lookback,
            ModelConfig::AlphaTRim(c) => c.lookback,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => c.horizon,
            ModelConfig::AlphaTRim(c) => c.horizon,
        }
    }

    pub fn features(&self) -> usize {
        match self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => c.features,
            ModelConfig::AlphaTRim(c) => c.features,
        }
    }

    /// The α_t-RIM is trained without an L1 term.
    pub fn l1(&self) -> f64 {
        match self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => c.l1,
            ModelConfig::AlphaTRim(_) => 0.0,
        }
    }

    /// Small default architecture for desk-scale runs.
    pub fn desk_default(kind: ModelKind, lookback: usize, features: usize) -> Self {
        let baseline = BaselineConfig {
            units: 10,
            l1: 1e-4,
            dropout: 0.1,
            lookback,
            horizon: HORIZON,
            features,
        };
        match kind {
            ModelKind::Rnn => ModelConfig::Rnn(baseline),
            ModelKind::Lstm => ModelConfig::Lstm(baseline),
            ModelKind::AlphaTRim => ModelConfig::AlphaTRim(RimConfig {
                units: 10,
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
                lookback,
                horizon: HORIZON,
                features,
                include_self_in_comm: true,
            }),
        }
    }

    /// Same architecture adapted to a window shape.
    pub fn with_window(mut self, lookback: usize, features: usize) -> Self {
        match &mut self {
            ModelConfig::Rnn(c) | ModelConfig::Lstm(c) => {
                c.lookback = lookback;
                c.features = features;
            }
            ModelConfig::AlphaTRim(c) => {
                c.lookback = lookback;
                c.features = features;
            }
        }
        self
    }
}

/// A recurrent cell followed by `prediction = W h_T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline<C> {
    pub cell: C,
    /// `horizon x hidden`
    pub readout_w: Matrix,
    /// `1 x horizon`
    pub readout_b: Matrix,
}

impl<C: Parameters> Parameters for Baseline<C> {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        self.cell.visit(&mut |n, kind, m| f(format!("cell.{n}"), kind, m));
        f("readout.W".into(), LeafKind::Weight, &self.readout_w);
        f("readout.b".into(), LeafKind::Bias, &self.readout_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        self.cell.visit_mut(&mut |n, kind, m| f(format!("cell.{n}"), kind, m));
        f("readout.W".into(), LeafKind::Weight, &mut self.readout_w);
        f("readout.b".into(), LeafKind::Bias, &mut self.readout_b);
    }
}

struct BaselineTape {
    seq: SequenceTape,
    mask: Option<Vec<f64>>,
    features: Vec<f64>,
    prediction: Vec<f64>,
}

fn window_rows(window: &Matrix, lookback: usize, features: usize) -> Result<Vec<Vec<f64>>> {
    if window.shape() != (lookback, features) {
        return Err(Error::Shape {
            op: "model window",
            left: window.shape(),
            right: (lookback, features),
        });
    }
    Ok((0..window.rows()).map(|t| window.row(t).to_vec()).collect())
}

impl<C: Cell> Baseline<C> {
    fn forward(
        &self,
        cfg: &BaselineConfig,
        window: &Matrix,
        rng: Option<&mut SeededRng>,
    ) -> Result<BaselineTape> {
        let inputs = window_rows(window, cfg.lookback, cfg.features)?;
        let seq = run_sequence(&self.cell, &self.cell.zero_state(), &inputs)?;
        let h = &seq.final_state().expect("lookback is positive").h;
        let mask = match rng {
            Some(rng) if cfg.dropout > 0.0 => {
                Some(dropout_mask(rng, 1, h.len(), 1.0 - cfg.dropout).into_data())
            }
            _ => None,
        };
        let features: Vec<f64> = match &mask {
            Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h.clone(),
        };
        let mut prediction = self.readout_w.matvec(&features)?;
        for (y, b) in prediction.iter_mut().zip(self.readout_b.data()) {
            *y += b;
        }
        Ok(BaselineTape {
            seq,
            mask,
            features,
            prediction,
        })
    }

    fn backward(&self, tape: &BaselineTape, d_pred: &[f64]) -> Result<Self> {
        let mut grads = zeros_like(self);
        grads.readout_w.add_outer(d_pred, &tape.features, 1.0);
        for (g, d) in grads.readout_b.data_mut().iter_mut().zip(d_pred) {
            *g += d;
        }
        let mut dh = self.readout_w.vecmat(d_pred)?;
        if let Some(m) = &tape.mask {
            dh.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
        }
        let steps = tape.seq.steps.len();
        let mut upstream = vec![vec![0.0; dh.len()]; steps];
        upstream[steps - 1] = dh;
        grads.cell = cell_backward(&self.cell, &tape.seq, &upstream)?.params;
        Ok(grads)
    }
}

/// Parameters of any supported model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Rnn(Baseline<RnnParams>),
    Lstm(Baseline<LstmParams>),
    AlphaTRim(RimParams),
}

impl Parameters for ModelParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        match self {
            ModelParams::Rnn(p) => p.visit(f),
            ModelParams::Lstm(p) => p.visit(f),
            ModelParams::AlphaTRim(p) => p.visit(f),
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        match self {
            ModelParams::Rnn(p) => p.visit_mut(f),
            ModelParams::Lstm(p) => p.visit_mut(f),
            ModelParams::AlphaTRim(p) => p.visit_mut(f),
        }
    }
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg {
            ModelConfig::Rnn(c) => ModelParams::Rnn(Baseline {
                cell: RnnParams::new(c.features, c.units, rng),
                readout_w: glorot_uniform(c.horizon, c.units, rng),
                readout_b: Matrix::zeros(1, c.horizon),
            }),
            ModelConfig::Lstm(c) => ModelParams::Lstm(Baseline {
                cell: LstmParams::new(c.features, c.units, rng),
                readout_w: glorot_uniform(c.horizon, c.units, rng),
                readout_b: Matrix::zeros(1, c.horizon),
            }),
            ModelConfig::AlphaTRim(c) => ModelParams::AlphaTRim(RimParams::new(c, rng)?),
        })
    }
}

/// Per-sample data loss and the gradient of the full objective.
#[derive(Debug, Clone)]
pub struct SampleGrad {
    pub mse: f64,
    pub grads: ModelParams,
}

/// A configured model with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub config: ModelConfig,
    pub params: ModelParams,
}

const INIT_STREAM: u64 = 0x1417;

fn mse(prediction: &[f64], target: &[f64]) -> f64 {
    prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / target.len() as f64
}

impl Forecaster {
    /// Initializes parameters from a stream derived from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = SeededRng::new(seed).fork(INIT_STREAM);
        let params = ModelParams::init(&config, &mut rng)?;
        Ok(Self { config, params })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind()
    }

    /// Deterministic forecast with dropout disabled.
    pub fn predict(&self, window: &Matrix) -> Result<Vec<f64>> {
        match (&self.config, &self.params) {
            (ModelConfig::Rnn(c), ModelParams::Rnn(p)) => Ok(p.forward(c, window, None)?.prediction),
            (ModelConfig::Lstm(c), ModelParams::Lstm(p)) => Ok(p.forward(c, window, None)?.prediction),
            (ModelConfig::AlphaTRim(c), ModelParams::AlphaTRim(p)) => {
                let mut unused = SeededRng::new(0);
                Ok(rim::forward(p, c, window, Mode::Eval, &mut unused)?.prediction)
            }
            _ => Err(mismatch()),
        }
    }

    pub fn predict_all(&self, inputs: &[Matrix], exec: Execution) -> Result<Vec<Vec<f64>>> {
        exec.map(inputs, |_, w| self.predict(w)).into_iter().collect()
    }

    /// Training-mode forward and backward for one window. Dropout masks are
    /// drawn from `rng`.
    pub fn sample_grad(&self, window: &Matrix, target: &[f64], rng: &mut SeededRng) -> Result<SampleGrad> {
        let horizon = self.config.horizon();
        if target.len() != horizon {
            return Err(Error::Length {
                op: "sample target",
                left: target.len(),
                right: horizon,
            });
        }
        let n = horizon as f64;
        let d_of = |pred: &[f64]| -> Vec<f64> {
            pred.iter().zip(target).map(|(y, t)| 2.0 * (y - t) / n).collect()
        };
        let (mse, mut grads) = match (&self.config, &self.params) {
            (ModelConfig::Rnn(c), ModelParams::Rnn(p)) => {
                let tape = p.forward(c, window, Some(rng))?;
                let g = p.backward(&tape, &d_of(&tape.prediction))?;
                (mse(&tape.prediction, target), ModelParams::Rnn(g))
            }
            (ModelConfig::Lstm(c), ModelParams::Lstm(p)) => {
                let tape = p.forward(c, window, Some(rng))?;
                let g = p.backward(&tape, &d_of(&tape.prediction))?;
                (mse(&tape.prediction, target), ModelParams::Lstm(g))
            }
            (ModelConfig::AlphaTRim(c), ModelParams::AlphaTRim(p)) => {
                let tape = rim::forward(p, c, window, Mode::Train, rng)?;
                let g = rim::backward_from_output(p, c, &tape, &d_of(&tape.prediction))?;
                (mse(&tape.prediction, target), ModelParams::AlphaTRim(g))
            }
            _ => return Err(mismatch()),
        };
        add_l1_grad(&mut grads, &self.params, self.config.l1());
        Ok(SampleGrad { mse, grads })
    }

    /// Training-mode objective for one window: MSE plus the L1 term.
    pub fn sample_objective(&self, window: &Matrix, target: &[f64], rng: &mut SeededRng) -> Result<f64> {
        let pred = match (&self.config, &self.params) {
            (ModelConfig::Rnn(c), ModelParams::Rnn(p)) => p.forward(c, window, Some(rng))?.prediction,
            (ModelConfig::Lstm(c), ModelParams::Lstm(p)) => p.forward(c, window, Some(rng))?.prediction,
            (ModelConfig::AlphaTRim(c), ModelParams::AlphaTRim(p)) => {
                rim::forward(p, c, window, Mode::Train, rng)?.prediction
            }
            _ => return Err(mismatch()),
        };
        loss(&pred, target, &self.params, self.config.l1())
    }
}

impl Forecaster {
    /// Largest relative error between the analytic gradient of the training
    /// objective and central finite differences. Dropout masks and, for the
    /// α_t-RIM, activation sets are drawn once from `seed` and then held
    /// fixed.
    pub fn gradient_check(&self, window: &Matrix, target: &[f64], seed: u64, eps: f64) -> Result<f64> {
        let theta = flatten(&self.params);
        let (analytic, numeric) = match (&self.config, &self.params) {
            (ModelConfig::AlphaTRim(c), ModelParams::AlphaTRim(p)) => {
                let tape = rim::forward(p, c, window, Mode::Train, &mut SeededRng::new(seed))?;
                let decisions = tape.decisions();
                let grads = rim::backward(p, c, &tape, target, 0.0)?;
                let mut probe = p.clone();
                let numeric = finite_diff_grad(
                    |th| {
                        assign_flat(&mut probe, th).expect("same layout");
                        rim::forward_frozen(&probe, c, window, &decisions)
                            .and_then(|t| loss(&t.prediction, target, &probe, 0.0))
                            .unwrap_or(f64::NAN)
                    },
                    &theta,
                    eps,
                )?;
                (flatten(&grads), numeric)
            }
            _ => {
                let grads = self.sample_grad(window, target, &mut SeededRng::new(seed))?.grads;
                let mut probe = self.clone();
                let numeric = finite_diff_grad(
                    |th| {
                        assign_flat(&mut probe.params, th).expect("same layout");
                        probe
                            .sample_objective(window, target, &mut SeededRng::new(seed))
                            .unwrap_or(f64::NAN)
                    },
                    &theta,
                    eps,
                )?;
                (flatten(&grads), numeric)
            }
        };
        Ok(max_relative_error(&analytic, &numeric))
    }
}

fn mismatch() -> Error {
    Error::Config("model parameters do not match the configured kind".into())
}

/// `MSE(prediction, target) + l1_weight · Σ|w|` over weight leaves.
pub fn loss<P: Parameters>(prediction: &[f64], target: &[f64], params: &P, l1_weight: f64) -> Result<f64> {
    if prediction.len() != target.len() || target.is_empty() {
        return Err(Error::Length {
            op: "loss",
            left: prediction.len(),
            right: target.len(),
        });
    }
    let reg = if l1_weight == 0.0 { 0.0 } else { l1_weight * l1_norm(params) };
    Ok(mse(prediction, target) + reg)
}
