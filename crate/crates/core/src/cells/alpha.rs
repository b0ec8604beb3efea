//! Exponentially smoothed cells.
//!
//! Both cells compute a candidate `ĥ_t = tanh(W_in x_t + U_rec h̃_t + b)` from
//! the carried smoothed state and then blend
//! `h̃_{t+1} = α_t ĥ_t + (1 − α_t) h̃_t`. The α-RNN uses a fixed `α`; the
//! α_t-RNN produces `α_t = σ(w_α·x_t + u_α m_{t−1} + b_α)` from a single-unit
//! recurrent subnet whose memory `m` is the pre-squash value.

use crate::error::{Error, Result};
use crate::init::{glorot_uniform, orthogonal_init};
use crate::matrix::{dot, sigmoid, Matrix};
use crate::params::{LeafKind, Parameters};
use crate::rng::SeededRng;

use super::{affine, affine_backward, Cell, CellState, StateGrad, StepCache};

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaParams {
    pub w_in: Matrix,
    pub u_rec: Matrix,
    pub b: Matrix,
    /// 1x1 smoothing coefficient in (0, 1].
    pub alpha: Matrix,
}

impl AlphaParams {
    pub fn new(input: usize, hidden: usize, alpha: f64, rng: &mut SeededRng) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(Self {
            w_in: glorot_uniform(hidden, input, rng),
            u_rec: orthogonal_init(hidden, rng),
            b: Matrix::zeros(1, hidden),
            alpha: Matrix::filled(1, 1, alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.get(0, 0)
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

impl Parameters for AlphaParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        f("W_in".into(), LeafKind::Weight, &self.w_in);
        f("U_rec".into(), LeafKind::Weight, &self.u_rec);
        f("b".into(), LeafKind::Bias, &self.b);
        f("alpha".into(), LeafKind::Smoothing, &self.alpha);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        f("W_in".into(), LeafKind::Weight, &mut self.w_in);
        f("U_rec".into(), LeafKind::Weight, &mut self.u_rec);
        f("b".into(), LeafKind::Bias, &mut self.b);
        f("alpha".into(), LeafKind::Smoothing, &mut self.alpha);
    }
}

fn smooth(h_hat: &[f64], h_prev: &[f64], alpha: f64) -> Vec<f64> {
    h_hat
        .iter()
        .zip(h_prev)
        .map(|(hh, hp)| alpha * hh + (1.0 - alpha) * hp)
        .collect()
}

/// Shared backward of the candidate and blend; returns `(dh_prev, dx, dα)`.
#[allow(clippy::too_many_arguments)]
fn smooth_backward(
    w_in: &Matrix,
    u_rec: &Matrix,
    cache: &StepCache,
    dh_next: &[f64],
    g_w: &mut Matrix,
    g_u: &mut Matrix,
    g_b: &mut Matrix,
) -> (Vec<f64>, Vec<f64>, f64) {
    let alpha = cache.alpha;
    let h_hat = &cache.next.h_hat;
    let h_prev = &cache.prev.h;
    let mut d_alpha = 0.0;
    let mut dz = Vec::with_capacity(h_hat.len());
    for j in 0..h_hat.len() {
        d_alpha += dh_next[j] * (h_hat[j] - h_prev[j]);
        dz.push(dh_next[j] * alpha * (1.0 - h_hat[j] * h_hat[j]));
    }
    let (mut dh, dx) = affine_backward(w_in, u_rec, &dz, &cache.x, h_prev, g_w, g_u, g_b);
    for (d, g) in dh.iter_mut().zip(dh_next) {
        *d += (1.0 - alpha) * g;
    }
    (dh, dx, d_alpha)
}

impl Cell for AlphaParams {
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
        let alpha = self.alpha();
        validate_alpha(alpha)?;
        let h_hat: Vec<f64> = affine(&self.w_in, &self.u_rec, &self.b, x, &state.h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h = smooth(&h_hat, &state.h, alpha);
        Ok(StepCache {
            x: x.to_vec(),
            prev: state.clone(),
            next: CellState {
                h,
                h_hat,
                alpha_mem: 0.0,
                c: Vec::new(),
            },
            gates: Vec::new(),
            alpha,
        })
    }

    fn step_backward(
        &self,
        cache: &StepCache,
        upstream: &StateGrad,
        grads: &mut Self,
    ) -> (StateGrad, Vec<f64>) {
        let (dh, dx, d_alpha) = smooth_backward(
            &self.w_in,
            &self.u_rec,
            cache,
            &upstream.h,
            &mut grads.w_in,
            &mut grads.u_rec,
            &mut grads.b,
        );
        grads.alpha.data_mut()[0] += d_alpha;
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

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTParams {
    pub w_in: Matrix,
    pub u_rec: Matrix,
    pub b: Matrix,
    /// 1 x input
    pub w_alpha_in: Matrix,
    /// 1x1
    pub u_alpha: Matrix,
    /// 1x1
    pub b_alpha: Matrix,
}

impl AlphaTParams {
    pub fn new(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        Self {
            w_in: glorot_uniform(hidden, input, rng),
            u_rec: orthogonal_init(hidden, rng),
            b: Matrix::zeros(1, hidden),
            w_alpha_in: glorot_uniform(1, input, rng),
            u_alpha: orthogonal_init(1, rng),
            b_alpha: Matrix::zeros(1, 1),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_in: Matrix::zeros(hidden, input),
            u_rec: Matrix::zeros(hidden, hidden),
            b: Matrix::zeros(1, hidden),
            w_alpha_in: Matrix::zeros(1, input),
            u_alpha: Matrix::zeros(1, 1),
            b_alpha: Matrix::zeros(1, 1),
        }
    }

    /// Pre-squash subnet value for input `x` and memory `mem`.
    pub fn alpha_logit(&self, x: &[f64], mem: f64) -> f64 {
        dot(self.w_alpha_in.data(), x) + self.u_alpha.get(0, 0) * mem + self.b_alpha.get(0, 0)
    }
}

impl Parameters for AlphaTParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        f("W_in".into(), LeafKind::Weight, &self.w_in);
        f("U_rec".into(), LeafKind::Weight, &self.u_rec);
        f("b".into(), LeafKind::Bias, &self.b);
        f("w_alpha_in".into(), LeafKind::Weight, &self.w_alpha_in);
        f("u_alpha".into(), LeafKind::Weight, &self.u_alpha);
        f("b_alpha".into(), LeafKind::Bias, &self.b_alpha);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        f("W_in".into(), LeafKind::Weight, &mut self.w_in);
        f("U_rec".into(), LeafKind::Weight, &mut self.u_rec);
        f("b".into(), LeafKind::Bias, &mut self.b);
        f("w_alpha_in".into(), LeafKind::Weight, &mut self.w_alpha_in);
        f("u_alpha".into(), LeafKind::Weight, &mut self.u_alpha);
        f("b_alpha".into(), LeafKind::Bias, &mut self.b_alpha);
    }
}

impl Cell for AlphaTParams {
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
        let h_hat: Vec<f64> = affine(&self.w_in, &self.u_rec, &self.b, x, &state.h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let logit = self.alpha_logit(x, state.alpha_mem);
        let alpha = sigmoid(logit);
        let h = smooth(&h_hat, &state.h, alpha);
        Ok(StepCache {
            x: x.to_vec(),
            prev: state.clone(),
            next: CellState {
                h,
                h_hat,
                alpha_mem: logit,
                c: Vec::new(),
            },
            gates: Vec::new(),
            alpha,
        })
    }

    fn step_backward(
        &self,
        cache: &StepCache,
        upstream: &StateGrad,
        grads: &mut Self,
    ) -> (StateGrad, Vec<f64>) {
        let (dh, mut dx, d_alpha) = smooth_backward(
            &self.w_in,
            &self.u_rec,
            cache,
            &upstream.h,
            &mut grads.w_in,
            &mut grads.u_rec,
            &mut grads.b,
        );
        let alpha = cache.alpha;
        let d_logit = d_alpha * alpha * (1.0 - alpha) + upstream.alpha_mem;
        for (g, xi) in grads.w_alpha_in.data_mut().iter_mut().zip(&cache.x) {
            *g += d_logit * xi;
        }
        for (dxi, w) in dx.iter_mut().zip(self.w_alpha_in.data()) {
            *dxi += d_logit * w;
        }
        grads.u_alpha.data_mut()[0] += d_logit * cache.prev.alpha_mem;
        grads.b_alpha.data_mut()[0] += d_logit;
        (
            StateGrad {
                h: dh,
                alpha_mem: d_logit * self.u_alpha.get(0, 0),
                c: Vec::new(),
            },
            dx,
        )
    }
}

pub fn alpha_t_step(
    state: &CellState,
    x: &[f64],
    p: &AlphaTParams,
) -> Result<(CellState, Vec<f64>)> {
    let cache = p.step(state, x)?;
    let h = cache.next.h.clone();
    Ok((cache.next, h))
}

pub fn alpha_static_step(
    state: &CellState,
    x: &[f64],
    p: &AlphaParams,
) -> Result<(CellState, Vec<f64>)> {
    let cache = p.step(state, x)?;
    let h = cache.next.h.clone();
    Ok((cache.next, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{rnn_step, RnnParams};

    fn rnn_of(p: &AlphaTParams) -> RnnParams {
        RnnParams {
            w_in: p.w_in.clone(),
            u_rec: p.u_rec.clone(),
            b: p.b.clone(),
        }
    }

    #[test]
    fn saturated_alpha_reduces_to_rnn() {
        let mut rng = SeededRng::new(9);
        let mut p = AlphaTParams::new(2, 3, &mut rng);
        p.b_alpha.set(0, 0, 500.0);
        p.u_alpha.set(0, 0, 0.0);
        let rnn = rnn_of(&p);
        let mut s = p.zero_state();
        let mut r = rnn.zero_state();
        for t in 0..6 {
            let x = [0.1 * t as f64, -0.3];
            let (ns, h) = alpha_t_step(&s, &x, &p).unwrap();
            let (nr, hr) = rnn_step(&r, &x, &rnn).unwrap();
            assert_eq!(h, hr);
            s = ns;
            r = nr;
        }
    }

    #[test]
    fn half_alpha_blend() {
        let mut p = AlphaTParams::zeros(1, 1);
        p.b.set(0, 0, 50.0);
        let (_, h) = alpha_t_step(&p.zero_state(), &[0.0], &p).unwrap();
        assert_eq!(h, vec![0.5]);
    }

    #[test]
    fn alpha_stays_in_open_interval() {
        let mut rng = SeededRng::new(4);
        let p = AlphaTParams::new(2, 4, &mut rng);
        let mut s = p.zero_state();
        for t in 0..50 {
            let x = [(t as f64).sin() * 3.0, (t as f64 * 0.3).cos()];
            let c = p.step(&s, &x).unwrap();
            assert!(c.alpha > 0.0 && c.alpha < 1.0);
            assert!(c.next.h.iter().all(|v| v.abs() <= 1.0));
            s = c.next;
        }
    }

    #[test]
    fn static_alpha_one_is_rnn() {
        let mut rng = SeededRng::new(1);
        let p = AlphaParams::new(2, 3, 1.0, &mut rng).unwrap();
        let rnn = RnnParams {
            w_in: p.w_in.clone(),
            u_rec: p.u_rec.clone(),
            b: p.b.clone(),
        };
        let mut s = p.zero_state();
        let mut r = rnn.zero_state();
        for t in 0..5 {
            let x = [t as f64 * 0.2, 1.0 - t as f64 * 0.1];
            let (ns, h) = alpha_static_step(&s, &x, &p).unwrap();
            let (nr, hr) = rnn_step(&r, &x, &rnn).unwrap();
            assert_eq!(h, hr);
            s = ns;
            r = nr;
        }
    }

    #[test]
    fn static_blend_example() {
        let p = AlphaParams {
            w_in: Matrix::zeros(1, 1),
            u_rec: Matrix::zeros(1, 1),
            b: Matrix::filled(1, 1, 0.9f64.atanh()),
            alpha: Matrix::filled(1, 1, 0.3),
        };
        let mut s = p.zero_state();
        s.h = vec![0.1];
        let (_, h) = alpha_static_step(&s, &[0.0], &p).unwrap();
        assert!((h[0] - 0.34).abs() < 1e-15);
    }

    #[test]
    fn invalid_static_alpha() {
        let mut rng = SeededRng::new(1);
        assert!(matches!(
            AlphaParams::new(1, 1, 0.0, &mut rng),
            Err(Error::InvalidAlpha(_))
        ));
        assert!(AlphaParams::new(1, 1, 1.2, &mut rng).is_err());
        let mut p = AlphaParams::new(1, 1, 0.5, &mut rng).unwrap();
        p.alpha.set(0, 0, -0.1);
        assert!(alpha_static_step(&p.zero_state(), &[1.0], &p).is_err());
    }

    #[test]
    fn static_matches_constant_subnet() {
        let mut rng = SeededRng::new(21);
        let alpha: f64 = 0.35;
        let stat = AlphaParams::new(2, 3, alpha, &mut rng).unwrap();
        let dynamic = AlphaTParams {
            w_in: stat.w_in.clone(),
            u_rec: stat.u_rec.clone(),
            b: stat.b.clone(),
            w_alpha_in: Matrix::zeros(1, 2),
            u_alpha: Matrix::zeros(1, 1),
            b_alpha: Matrix::filled(1, 1, (alpha / (1.0 - alpha)).ln()),
        };
        let mut s1 = stat.zero_state();
        let mut s2 = dynamic.zero_state();
        for _ in 0..12 {
            let x = [rng.normal(), rng.normal()];
            let (a, ha) = alpha_static_step(&s1, &x, &stat).unwrap();
            let (b, hb) = alpha_t_step(&s2, &x, &dynamic).unwrap();
            for (u, v) in ha.iter().zip(&hb) {
                assert!((u - v).abs() <= 1e-12);
            }
            s1 = a;
            s2 = b;
        }
    }

    /// Single unit, single step, loss `L = h'^2 / 2` with
    /// `h' = α ĥ + (1 − α) h0`, `ĥ = tanh(w x + u h0 + b)`,
    /// `α = σ(a x + v m0 + c)`. By hand:
    ///
    /// * `∂L/∂w = h' α (1 − ĥ²) x`, `∂L/∂u = h' α (1 − ĥ²) h0`, `∂L/∂b = h' α (1 − ĥ²)`
    /// * `∂L/∂a = h' (ĥ − h0) α (1 − α) x`, likewise `m0` for `v` and `1` for `c`
    /// * `∂L/∂h0 = h' (1 − α + α (1 − ĥ²) u)`, `∂L/∂m0 = h' (ĥ − h0) α (1 − α) v`
    #[test]
    fn single_step_closed_form_gradient() {
        let (w, u, b, a, v, c) = (0.7, -0.4, 0.1, 0.9, 0.6, -0.2);
        let (x, h0, m0) = (0.8, 0.3, -0.5);
        let p = AlphaTParams {
            w_in: Matrix::filled(1, 1, w),
            u_rec: Matrix::filled(1, 1, u),
            b: Matrix::filled(1, 1, b),
            w_alpha_in: Matrix::filled(1, 1, a),
            u_alpha: Matrix::filled(1, 1, v),
            b_alpha: Matrix::filled(1, 1, c),
        };
        let state = CellState {
            h: vec![h0],
            h_hat: vec![0.0],
            alpha_mem: m0,
            c: Vec::new(),
        };
        let cache = p.step(&state, &[x]).unwrap();

        let hh = (w * x + u * h0 + b).tanh();
        let al = 1.0 / (1.0 + (-(a * x + v * m0 + c)).exp());
        let hn = al * hh + (1.0 - al) * h0;
        let k = hn * al * (1.0 - hh * hh);
        let q = hn * (hh - h0) * al * (1.0 - al);

        let mut grads = crate::params::zeros_like(&p);
        let up = StateGrad {
            h: vec![hn],
            alpha_mem: 0.0,
            c: Vec::new(),
        };
        let (prev, dx) = p.step_backward(&cache, &up, &mut grads);
        let close = |got: f64, want: f64| assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        close(grads.w_in.get(0, 0), k * x);
        close(grads.u_rec.get(0, 0), k * h0);
        close(grads.b.get(0, 0), k);
        close(grads.w_alpha_in.get(0, 0), q * x);
        close(grads.u_alpha.get(0, 0), q * m0);
        close(grads.b_alpha.get(0, 0), q);
        close(prev.h[0], hn * (1.0 - al + al * (1.0 - hh * hh) * u));
        close(prev.alpha_mem, q * v);
        close(dx[0], k * w + q * a);
    }
}
