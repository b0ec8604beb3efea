use crate::attention::{
    build_input_objects, communication_attention, communication_backward, dropout_mask,
    input_attention, input_attention_backward, CommunicationCache, InputAttentionCache,
};
use crate::cells::{Cell, CellState, StateGrad, StepCache};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{add_l1_grad, zeros_like};
use crate::rng::SeededRng;

use super::{RimConfig, RimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout on, masks drawn from the caller's generator.
    Train,
    /// Dropout off; the forward pass is a pure function of params and input.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RimState {
    pub cells: Vec<CellState>,
    pub step: usize,
}

impl RimState {
    pub fn zeros(cfg: &RimConfig) -> Self {
        Self {
            cells: (0..cfg.num_modules)
                .map(|_| CellState::zeros(cfg.units))
                .collect(),
            step: 0,
        }
    }

    pub fn hidden_matrix(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self.cells.iter().map(|c| c.h.clone()).collect();
        Matrix::from_rows(&rows).expect("non-empty module states")
    }
}

/// Discrete choices made during one step: which modules ran and which
/// dropout masks were drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecisions {
    pub active: Vec<usize>,
    pub input_mask: Option<Matrix>,
    pub comm_mask: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    pub steps: Vec<StepDecisions>,
}

enum Control<'a> {
    Eval,
    Train(&'a mut SeededRng),
    Frozen(&'a StepDecisions),
}

#[derive(Debug, Clone)]
struct StepTape {
    input: InputAttentionCache,
    null_weight: Vec<f64>,
    decisions: StepDecisions,
    cells: Vec<Option<StepCache>>,
    comm: CommunicationCache,
}

/// Forward record of a whole window.
#[derive(Debug, Clone)]
pub struct RimTape {
    steps: Vec<StepTape>,
    final_concat: Vec<f64>,
    pub prediction: Vec<f64>,
}

impl RimTape {
    pub fn decisions(&self) -> Decisions {
        Decisions {
            steps: self.steps.iter().map(|s| s.decisions.clone()).collect(),
        }
    }

    /// Active set of every step.
    pub fn active_sets(&self) -> Vec<Vec<usize>> {
        self.steps.iter().map(|s| s.decisions.active.clone()).collect()
    }

    pub fn null_weights(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.null_weight.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Indices of the `n_active` modules with the least null-row attention,
/// ties broken by ascending index. Returned in ascending index order.
pub fn select_active(null_weights: &[f64], n_active: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..null_weights.len()).collect();
    order.sort_by(|&a, &b| {
        null_weights[a]
            .total_cmp(&null_weights[b])
            .then(a.cmp(&b))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(n_active).collect();
    chosen.sort_unstable();
    chosen
}

fn draw_mask(
    rng: &mut SeededRng,
    rows: usize,
    cols: usize,
    keep: f64,
) -> Option<Matrix> {
    (keep < 1.0).then(|| dropout_mask(rng, rows, cols, keep))
}

fn step_impl(
    state: &RimState,
    x: &[f64],
    p: &RimParams,
    cfg: &RimConfig,
    control: Control<'_>,
) -> Result<(RimState, StepTape)> {
    if x.len() != cfg.features {
        return Err(Error::Shape {
            op: "rim_step input",
            left: (x.len(), 1),
            right: (cfg.features, 1),
        });
    }
    if state.cells.len() != cfg.num_modules {
        return Err(Error::Shape {
            op: "rim_step state",
            left: (state.cells.len(), cfg.units),
            right: (cfg.num_modules, cfg.units),
        });
    }
    let modules = cfg.num_modules;
    let h = state.hidden_matrix();
    let objects = build_input_objects(x)?;

    let (input_mask, frozen) = match &control {
        Control::Frozen(d) => (d.input_mask.clone(), Some(*d)),
        _ => (None, None),
    };
    let mut control = control;
    let input_mask = match &mut control {
        Control::Train(rng) => draw_mask(
            rng,
            modules,
            cfg.input_geometry().total_value(),
            cfg.input_keep_prob,
        ),
        _ => input_mask,
    };
    let ia = input_attention(&h, &objects, &p.input_attention, input_mask.as_ref())?;

    let active = match frozen {
        Some(d) => {
            if d.active.len() != cfg.num_active || d.active.iter().any(|&k| k >= modules) {
                return Err(Error::Tape(format!(
                    "frozen active set {:?} invalid for {} of {modules} modules",
                    d.active, cfg.num_active
                )));
            }
            d.active.clone()
        }
        None => select_active(&ia.null_weight, cfg.num_active),
    };

    let mut next = state.clone();
    let mut caches: Vec<Option<StepCache>> = vec![None; modules];
    for &k in &active {
        let cache = p.cells[k].step(&state.cells[k], ia.attended.row(k))?;
        next.cells[k] = cache.next.clone();
        caches[k] = Some(cache);
    }

    let comm_mask = match (&mut control, frozen) {
        (Control::Train(rng), _) => draw_mask(
            rng,
            modules,
            cfg.comm_geometry().total_value(),
            cfg.comm_keep_prob,
        ),
        (_, Some(d)) => d.comm_mask.clone(),
        _ => None,
    };
    let h_mid = next.hidden_matrix();
    let (delta, comm) = communication_attention(
        &h_mid,
        &active,
        &p.communication,
        cfg.include_self_in_comm,
        comm_mask.as_ref(),
    )?;
    for &k in &active {
        for (hv, d) in next.cells[k].h.iter_mut().zip(delta.row(k)) {
            *hv += d;
        }
    }
    next.step = state.step + 1;

    Ok((
        next,
        StepTape {
            input: ia.cache,
            null_weight: ia.null_weight,
            decisions: StepDecisions {
                active,
                input_mask,
                comm_mask,
            },
            cells: caches,
            comm,
        },
    ))
}

/// One step: input attention, top-k activation, α_t-RNN transition of the
/// active modules, then residual communication into the active modules.
/// Inactive modules keep their state untouched.
pub fn rim_step(
    state: &RimState,
    x: &[f64],
    p: &RimParams,
    cfg: &RimConfig,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<RimState> {
    let control = match mode {
        Mode::Train => Control::Train(rng),
        Mode::Eval => Control::Eval,
    };
    step_impl(state, x, p, cfg, control).map(|(s, _)| s)
}

fn check_window(window: &Matrix, cfg: &RimConfig) -> Result<()> {
    if window.cols() != cfg.features || window.rows() != cfg.lookback {
        return Err(Error::Shape {
            op: "rim forward window",
            left: window.shape(),
            right: (cfg.lookback, cfg.features),
        });
    }
    Ok(())
}

fn finish(p: &RimParams, state: &RimState, steps: Vec<StepTape>) -> RimTape {
    let final_concat: Vec<f64> = state.cells.iter().flat_map(|c| c.h.iter().copied()).collect();
    let mut prediction = p.readout_w.matvec(&final_concat).expect("readout shape");
    for (y, b) in prediction.iter_mut().zip(p.readout_b.data()) {
        *y += b;
    }
    RimTape {
        steps,
        final_concat,
        prediction,
    }
}

/// Unrolls the model over a `lookback x features` window and reads out all
/// horizon steps jointly from the final states of every module.
pub fn forward(
    p: &RimParams,
    cfg: &RimConfig,
    window: &Matrix,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<RimTape> {
    check_window(window, cfg)?;
    p.check(cfg)?;
    let mut state = RimState::zeros(cfg);
    let mut steps = Vec::with_capacity(window.rows());
    for t in 0..window.rows() {
        let control = match mode {
            Mode::Train => Control::Train(rng),
            Mode::Eval => Control::Eval,
        };
        let (next, tape) = step_impl(&state, window.row(t), p, cfg, control)?;
        state = next;
        steps.push(tape);
    }
    Ok(finish(p, &state, steps))
}

/// Forward pass replaying previously recorded activation sets and dropout
/// masks, which makes the output a smooth function of the parameters.
pub fn forward_frozen(
    p: &RimParams,
    cfg: &RimConfig,
    window: &Matrix,
    decisions: &Decisions,
) -> Result<RimTape> {
    check_window(window, cfg)?;
    p.check(cfg)?;
    if decisions.steps.len() != window.rows() {
        return Err(Error::Tape(format!(
            "{} recorded steps for a window of {}",
            decisions.steps.len(),
            window.rows()
        )));
    }
    let mut state = RimState::zeros(cfg);
    let mut steps = Vec::with_capacity(window.rows());
    for (t, d) in decisions.steps.iter().enumerate() {
        let (next, tape) = step_impl(&state, window.row(t), p, cfg, Control::Frozen(d))?;
        state = next;
        steps.push(tape);
    }
    Ok(finish(p, &state, steps))
}

/// Gradients of an arbitrary scalar loss given `∂L/∂prediction`. The
/// discrete activation choice is treated as a constant.
pub fn backward_from_output(
    p: &RimParams,
    cfg: &RimConfig,
    tape: &RimTape,
    d_pred: &[f64],
) -> Result<RimParams> {
    if d_pred.len() != cfg.horizon || tape.prediction.len() != cfg.horizon {
        return Err(Error::Tape(format!(
            "output gradient of length {} for horizon {}",
            d_pred.len(),
            cfg.horizon
        )));
    }
    p.check(cfg)?;
    let mut grads = zeros_like(p);
    grads.readout_w.add_outer(d_pred, &tape.final_concat, 1.0);
    for (g, d) in grads.readout_b.data_mut().iter_mut().zip(d_pred) {
        *g += d;
    }
    let d_concat = p.readout_w.vecmat(d_pred)?;
    let units = cfg.units;
    let mut dh = Matrix::new(cfg.num_modules, units, d_concat)?;
    let mut dmem = vec![0.0; cfg.num_modules];

    for step in tape.steps.iter().rev() {
        // residual: h_out = h_mid + delta (delta rows are zero for inactive modules)
        let from_comm = communication_backward(&p.communication, &step.comm, &dh, &mut grads.communication);
        let mut d_mid = dh;
        d_mid.add_assign(&from_comm)?;

        let mut d_prev = Matrix::zeros(cfg.num_modules, units);
        let mut d_attended = Matrix::zeros(cfg.num_modules, cfg.cell_input());
        for k in 0..cfg.num_modules {
            match &step.cells[k] {
                Some(cache) => {
                    let upstream = StateGrad {
                        h: d_mid.row(k).to_vec(),
                        alpha_mem: dmem[k],
                        c: Vec::new(),
                    };
                    let (prev, dx) = p.cells[k].step_backward(cache, &upstream, &mut grads.cells[k]);
                    d_prev.row_mut(k).copy_from_slice(&prev.h);
                    dmem[k] = prev.alpha_mem;
                    d_attended.row_mut(k).copy_from_slice(&dx);
                }
                None => d_prev.row_mut(k).copy_from_slice(d_mid.row(k)),
            }
        }
        let from_input = input_attention_backward(
            &p.input_attention,
            &step.input,
            &d_attended,
            &mut grads.input_attention,
        );
        d_prev.add_assign(&from_input)?;
        dh = d_prev;
    }
    Ok(grads)
}

/// Gradients of `MSE(prediction, target) + l1_weight · Σ|w|`.
pub fn backward(
    p: &RimParams,
    cfg: &RimConfig,
    tape: &RimTape,
    target: &[f64],
    l1_weight: f64,
) -> Result<RimParams> {
    if target.len() != tape.prediction.len() {
        return Err(Error::Length {
            op: "rim backward target",
            left: target.len(),
            right: tape.prediction.len(),
        });
    }
    let n = target.len() as f64;
    let d_pred: Vec<f64> = tape
        .prediction
        .iter()
        .zip(target)
        .map(|(y, t)| 2.0 * (y - t) / n)
        .collect();
    let mut grads = backward_from_output(p, cfg, tape, &d_pred)?;
    add_l1_grad(&mut grads, p, l1_weight);
    Ok(grads)
}
