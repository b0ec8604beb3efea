use crate::error::Result;
use crate::init::{glorot_uniform, orthogonal_init};
use crate::matrix::{sigmoid, Matrix};
use crate::params::{LeafKind, Parameters};
use crate::rng::SeededRng;

use super::{affine, affine_backward, Cell, CellState, StateGrad, StepCache};

/// Single-layer LSTM. Gate blocks are stacked row-wise in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_in: Matrix,
    pub u_rec: Matrix,
    pub b: Matrix,
}

pub const FORGET_BIAS: f64 = 1.0;

impl LstmParams {
    pub fn new(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let w_in = glorot_uniform(4 * hidden, input, rng);
        let mut u_rec = Matrix::zeros(4 * hidden, hidden);
        for gate in 0..4 {
            let block = orthogonal_init(hidden, rng);
            for r in 0..hidden {
                u_rec.row_mut(gate * hidden + r).copy_from_slice(block.row(r));
            }
        }
        let mut b = Matrix::zeros(1, 4 * hidden);
        for j in hidden..2 * hidden {
            b.set(0, j, FORGET_BIAS);
        }
        Self { w_in, u_rec, b }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_in: Matrix::zeros(4 * hidden, input),
            u_rec: Matrix::zeros(4 * hidden, hidden),
            b: Matrix::zeros(1, 4 * hidden),
        }
    }
}

impl Parameters for LstmParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        f("W_in".into(), LeafKind::Weight, &self.w_in);
        f("U_rec".into(), LeafKind::Weight, &self.u_rec);
        f("b".into(), LeafKind::Bias, &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        f("W_in".into(), LeafKind::Weight, &mut self.w_in);
        f("U_rec".into(), LeafKind::Weight, &mut self.u_rec);
        f("b".into(), LeafKind::Bias, &mut self.b);
    }
}

impl Cell for LstmParams {
    fn input_size(&self) -> usize {
        self.w_in.cols()
    }

    fn hidden_size(&self) -> usize {
        self.w_in.rows() / 4
    }

    fn zero_state(&self) -> CellState {
        CellState::zeros_with_memory(self.hidden_size())
    }

    fn step(&self, state: &CellState, x: &[f64]) -> Result<StepCache> {
        self.check_step(state, x)?;
        let n = self.hidden_size();
        let mut gates = affine(&self.w_in, &self.u_rec, &self.b, x, &state.h);
        for (j, g) in gates.iter_mut().enumerate() {
            *g = if (2 * n..3 * n).contains(&j) {
                g.tanh()
            } else {
                sigmoid(*g)
            };
        }
        let mut c = vec![0.0; n];
        let mut h = vec![0.0; n];
        for j in 0..n {
            let (i, f, g, o) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
            c[j] = f * state.c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        Ok(StepCache {
            x: x.to_vec(),
            prev: state.clone(),
            next: CellState {
                h_hat: h.clone(),
                h,
                alpha_mem: 0.0,
                c,
            },
            gates,
            alpha: 1.0,
        })
    }

    fn step_backward(
        &self,
        cache: &StepCache,
        upstream: &StateGrad,
        grads: &mut Self,
    ) -> (StateGrad, Vec<f64>) {
        let n = self.hidden_size();
        let gates = &cache.gates;
        let mut dz = vec![0.0; 4 * n];
        let mut dc_prev = vec![0.0; n];
        for j in 0..n {
            let (i, f, g, o) = (gates[j], gates[n + j], gates[2 * n + j], gates[3 * n + j]);
            let tc = cache.next.c[j].tanh();
            let dh = upstream.h[j];
            let dc = upstream.c[j] + dh * o * (1.0 - tc * tc);
            dz[j] = dc * g * i * (1.0 - i);
            dz[n + j] = dc * cache.prev.c[j] * f * (1.0 - f);
            dz[2 * n + j] = dc * i * (1.0 - g * g);
            dz[3 * n + j] = dh * tc * o * (1.0 - o);
            dc_prev[j] = dc * f;
        }
        let (dh, dx) = affine_backward(
            &self.w_in,
            &self.u_rec,
            &dz,
            &cache.x,
            &cache.prev.h,
            &mut grads.w_in,
            &mut grads.u_rec,
            &mut grads.b,
        );
        (
            StateGrad {
                h: dh,
                alpha_mem: 0.0,
                c: dc_prev,
            },
            dx,
        )
    }
}

pub fn lstm_step(state: &CellState, x: &[f64], p: &LstmParams) -> Result<(CellState, Vec<f64>)> {
    let cache = p.step(state, x)?;
    let h = cache.next.h.clone();
    Ok((cache.next, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params() {
        let p = LstmParams::zeros(2, 3);
        let (s, h) = lstm_step(&p.zero_state(), &[0.4, 1.0], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_keeps_memory() {
        let n = 2;
        let mut p = LstmParams::zeros(1, n);
        for j in 0..n {
            p.b.set(0, j, -500.0); // input gate closed
            p.b.set(0, n + j, 500.0); // forget gate open
        }
        let mut s = p.zero_state();
        s.c = vec![0.3, -0.8];
        let (next, _) = lstm_step(&s, &[2.0], &p).unwrap();
        assert_eq!(next.c, vec![0.3, -0.8]);
    }

    #[test]
    fn forget_bias_initialized() {
        let mut rng = SeededRng::new(0);
        let p = LstmParams::new(2, 3, &mut rng);
        assert_eq!(&p.b.data()[3..6], &[1.0, 1.0, 1.0]);
        assert_eq!(&p.b.data()[..3], &[0.0; 3]);
    }
}
