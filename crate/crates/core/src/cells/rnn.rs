use crate::error::Result;
use crate::init::{glorot_uniform, orthogonal_init};
use crate::matrix::Matrix;
use crate::params::{LeafKind, Parameters};
use crate::rng::SeededRng;

use super::{affine, affine_backward, Cell, CellState, StateGrad, StepCache};

/// `h = tanh(W_in x + U_rec h_prev + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub w_in: Matrix,
    pub u_rec: Matrix,
    pub b: Matrix,
}

impl RnnParams {
    pub fn new(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        Self {
            w_in: glorot_uniform(hidden, input, rng),
            u_rec: orthogonal_init(hidden, rng),
            b: Matrix::zeros(1, hidden),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_in: Matrix::zeros(hidden, input),
            u_rec: Matrix::zeros(hidden, hidden),
            b: Matrix::zeros(1, hidden),
        }
    }
}

impl Parameters for RnnParams {
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

impl Cell for RnnParams {
    fn input_size(&self) -> usize {
        self.w_in.cols()
    }

    fn hidden_size(&self) -> usize {
        self.w_in.rows()
    }

    fn zero_state(&self) -> CellState {
        CellState::zeros(self.hidden_size())
    }

    fn step(&self, state: &CellState, x: &[f64]) -> Result<StepCache> {
        self.check_step(state, x)?;
        let h: Vec<f64> = affine(&self.w_in, &self.u_rec, &self.b, x, &state.h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        Ok(StepCache {
            x: x.to_vec(),
            prev: state.clone(),
            next: CellState {
                h_hat: h.clone(),
                h,
                alpha_mem: 0.0,
                c: Vec::new(),
            },
            gates: Vec::new(),
            alpha: 1.0,
        })
    }

    fn step_backward(
        &self,
        cache: &StepCache,
        upstream: &StateGrad,
        grads: &mut Self,
    ) -> (StateGrad, Vec<f64>) {
        let dz: Vec<f64> = upstream
            .h
            .iter()
            .zip(&cache.next.h)
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
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
                c: Vec::new(),
            },
            dx,
        )
    }
}

pub fn rnn_step(state: &CellState, x: &[f64], p: &RnnParams) -> Result<(CellState, Vec<f64>)> {
    let cache = p.step(state, x)?;
    let h = cache.next.h.clone();
    Ok((cache.next, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_zero_output() {
        let p = RnnParams::zeros(2, 3);
        let (_, h) = rnn_step(&p.zero_state(), &[0.7, -1.2], &p).unwrap();
        assert_eq!(h, vec![0.0; 3]);
    }

    #[test]
    fn scalar_case() {
        let p = RnnParams {
            w_in: Matrix::new(1, 1, vec![1.0]).unwrap(),
            u_rec: Matrix::zeros(1, 1),
            b: Matrix::zeros(1, 1),
        };
        let (_, h) = rnn_step(&p.zero_state(), &[0.5], &p).unwrap();
        assert!((h[0] - 0.46211715726000974).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let p = RnnParams::zeros(2, 3);
        assert!(rnn_step(&p.zero_state(), &[1.0], &p).is_err());
        assert!(rnn_step(&CellState::zeros(2), &[1.0, 1.0], &p).is_err());
    }
}
