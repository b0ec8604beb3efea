//! Recurrent cells: simple RNN, LSTM, α-RNN (static smoothing) and α_t-RNN
//! (recurrently updated smoothing), each with a hand-derived backward step.

mod alpha;
mod lstm;
mod rnn;
mod unrolled;

pub use alpha::{alpha_static_step, alpha_t_step, AlphaParams, AlphaTParams};
pub use lstm::{lstm_step, LstmParams};
pub use rnn::{rnn_step, RnnParams};
pub use unrolled::{alpha_unrolled, unrolled_coefficients};

use crate::error::{Error, Result};
use crate::params::Parameters;

/// Carried state of a cell.
///
/// `h` is the cell output: the smoothed state h̃ for the α cells, the hidden
/// state otherwise. `c` is empty except for the LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    /// Last unsmoothed candidate ĥ (equal to `h` for non-smoothing cells).
    pub h_hat: Vec<f64>,
    /// Pre-squash recurrent memory of the α subnet.
    pub alpha_mem: f64,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            h_hat: vec![0.0; hidden],
            alpha_mem: 0.0,
            c: Vec::new(),
        }
    }

    pub fn zeros_with_memory(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            ..Self::zeros(hidden)
        }
    }
}

/// Gradient of a loss with respect to a [`CellState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrad {
    pub h: Vec<f64>,
    pub alpha_mem: f64,
    pub c: Vec<f64>,
}

impl StateGrad {
    pub fn zeros_like(state: &CellState) -> Self {
        Self {
            h: vec![0.0; state.h.len()],
            alpha_mem: 0.0,
            c: vec![0.0; state.c.len()],
        }
    }
}

/// Everything a backward step needs from its forward step.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub prev: CellState,
    pub next: CellState,
    /// LSTM gate activations, `[i, f, g, o]` blocks.
    pub gates: Vec<f64>,
    /// Smoothing coefficient used at this step (α cells only).
    pub alpha: f64,
}

pub trait Cell: Parameters + Send + Sync {
    fn input_size(&self) -> usize;
    fn hidden_size(&self) -> usize;
    fn zero_state(&self) -> CellState;

    /// One forward step; `cache.next` holds the new state.
    fn step(&self, state: &CellState, x: &[f64]) -> Result<StepCache>;

    /// Reverse of [`Cell::step`]. Accumulates parameter gradients into
    /// `grads` and returns the gradient with respect to the previous state
    /// and the input.
    fn step_backward(
        &self,
        cache: &StepCache,
        upstream: &StateGrad,
        grads: &mut Self,
    ) -> (StateGrad, Vec<f64>);

    fn check_step(&self, state: &CellState, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape {
                op: "cell step input",
                left: (x.len(), 1),
                right: (self.input_size(), 1),
            });
        }
        if state.h.len() != self.hidden_size() {
            return Err(Error::Shape {
                op: "cell step state",
                left: (state.h.len(), 1),
                right: (self.hidden_size(), 1),
            });
        }
        Ok(())
    }
}

/// Forward record of a whole input sequence.
#[derive(Debug, Clone)]
pub struct SequenceTape {
    pub steps: Vec<StepCache>,
}

impl SequenceTape {
    pub fn outputs(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.next.h.as_slice())
    }

    pub fn final_state(&self) -> Option<&CellState> {
        self.steps.last().map(|s| &s.next)
    }
}

pub fn run_sequence<C: Cell>(
    cell: &C,
    init: &CellState,
    inputs: &[Vec<f64>],
) -> Result<SequenceTape> {
    let mut steps = Vec::with_capacity(inputs.len());
    let mut state = init.clone();
    for x in inputs {
        let cache = cell.step(&state, x)?;
        state = cache.next.clone();
        steps.push(cache);
    }
    Ok(SequenceTape { steps })
}

#[derive(Debug, Clone)]
pub struct CellGradients<C> {
    pub params: C,
    pub inputs: Vec<Vec<f64>>,
    pub init: StateGrad,
}

/// Backpropagation through time over a recorded sequence.
///
/// `upstream[t]` is the gradient of the loss with respect to the output `h`
/// emitted at step `t`.
pub fn cell_backward<C: Cell>(
    cell: &C,
    tape: &SequenceTape,
    upstream: &[Vec<f64>],
) -> Result<CellGradients<C>> {
    if upstream.len() != tape.steps.len() {
        return Err(Error::Tape(format!(
            "{} upstream gradients for {} recorded steps",
            upstream.len(),
            tape.steps.len()
        )));
    }
    let Some(last) = tape.steps.last() else {
        return Err(Error::Tape("empty tape".into()));
    };
    let mut grads = crate::params::zeros_like(cell);
    let mut carry = StateGrad::zeros_like(&last.next);
    let mut inputs = vec![Vec::new(); tape.steps.len()];
    for (t, cache) in tape.steps.iter().enumerate().rev() {
        if upstream[t].len() != carry.h.len() {
            return Err(Error::Tape(format!(
                "upstream gradient at step {t} has length {}, expected {}",
                upstream[t].len(),
                carry.h.len()
            )));
        }
        for (c, u) in carry.h.iter_mut().zip(&upstream[t]) {
            *c += u;
        }
        let (prev, dx) = cell.step_backward(cache, &carry, &mut grads);
        inputs[t] = dx;
        carry = prev;
    }
    Ok(CellGradients {
        params: grads,
        inputs,
        init: carry,
    })
}

/// `W x + U h + b` for the standard gate layout.
pub(crate) fn affine(
    w_in: &crate::matrix::Matrix,
    u_rec: &crate::matrix::Matrix,
    b: &crate::matrix::Matrix,
    x: &[f64],
    h: &[f64],
) -> Vec<f64> {
    let mut z = w_in.matvec(x).expect("checked input size");
    let r = u_rec.matvec(h).expect("checked state size");
    for ((zi, ri), bi) in z.iter_mut().zip(&r).zip(b.data()) {
        *zi += ri + bi;
    }
    z
}

/// Accumulates gradients of `W x + U h + b` given `dz`; returns `(dh, dx)`.
pub(crate) fn affine_backward(
    w_in: &crate::matrix::Matrix,
    u_rec: &crate::matrix::Matrix,
    dz: &[f64],
    x: &[f64],
    h: &[f64],
    g_w: &mut crate::matrix::Matrix,
    g_u: &mut crate::matrix::Matrix,
    g_b: &mut crate::matrix::Matrix,
) -> (Vec<f64>, Vec<f64>) {
    g_w.add_outer(dz, x, 1.0);
    g_u.add_outer(dz, h, 1.0);
    for (gb, d) in g_b.data_mut().iter_mut().zip(dz) {
        *gb += d;
    }
    let dh = u_rec.vecmat(dz).expect("consistent shapes");
    let dx = w_in.vecmat(dz).expect("consistent shapes");
    (dh, dx)
}
