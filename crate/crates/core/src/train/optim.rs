use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{flatten, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates laid out like the flattened
/// parameter tree.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    shapes: Vec<(usize, usize)>,
}

fn shapes<P: Parameters>(p: &P) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    p.visit(&mut |_, _, m| out.push(m.shape()));
    out
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P, config: AdamConfig) -> Self {
        let shapes = shapes(params);
        let n = shapes.iter().map(|(r, c)| r * c).sum();
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            shapes,
        }
    }
}

fn check_layout<P: Parameters>(p: &P, expected: &[(usize, usize)]) -> Result<()> {
    let got = shapes(p);
    if got.len() != expected.len() {
        return Err(Error::Length {
            op: "adam_step leaves",
            left: got.len(),
            right: expected.len(),
        });
    }
    for (g, e) in got.iter().zip(expected) {
        if g != e {
            return Err(Error::Shape {
                op: "adam_step",
                left: *g,
                right: *e,
            });
        }
    }
    Ok(())
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    check_layout(params, &state.shapes)?;
    check_layout(grads, &state.shapes)?;
    let g = flatten(grads);
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let c1 = 1.0 - beta1.powf(state.step as f64);
    let c2 = 1.0 - beta2.powf(state.step as f64);
    let mut i = 0;
    let (m, v) = (&mut state.m, &mut state.v);
    params.visit_mut(&mut |_, _, leaf| {
        for theta in leaf.data_mut() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            i += 1;
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::RnnParams;
    use crate::params::{assign_flat, zeros_like};
    use crate::rng::SeededRng;

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = RnnParams::new(2, 3, &mut SeededRng::new(1));
        let before = p.clone();
        let mut state = AdamState::new(&p, AdamConfig::default());
        let g = zeros_like(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut state).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(state.step, 3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = RnnParams::zeros(1, 2);
        let mut g = zeros_like(&p);
        let n = flatten(&g).len();
        let vals: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 3.0 } else { -0.02 }).collect();
        assign_flat(&mut g, &vals).unwrap();
        let mut state = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut state).unwrap();
        for (theta, gi) in flatten(&p).iter().zip(&vals) {
            assert!((theta + 1e-3 * gi.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn layout_mismatch_rejected() {
        let mut p = RnnParams::zeros(1, 2);
        let g = RnnParams::zeros(2, 2);
        let mut state = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &g, &mut state).is_err());
    }
}
