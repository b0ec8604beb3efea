//! Closed-form unrolling of the smoothing recursion.
//!
//! With candidates `ĥ_1..ĥ_t`, coefficients `α_1..α_t` and initial smoothed
//! state `h̃_1`:
//!
//! ```text
//! h̃_{t+1} = α_t ĥ_t
//!         + Σ_{s=1}^{t−1} α_{t−s} Π_{r=1}^{s} (1 − α_{t−r+1}) ĥ_{t−s}
//!         + Π_{r=0}^{t−1} (1 − α_{t−r}) h̃_1
//! ```

use crate::error::{Error, Result};

/// Lag weights of the unrolled form.
///
/// Returns `(weights, init_weight)` where `weights[i]` multiplies `ĥ_{i+1}`
/// (0-based storage of the 1-based sequence) and `init_weight` multiplies the
/// initial smoothed state.
pub fn unrolled_coefficients(alpha_seq: &[f64]) -> (Vec<f64>, f64) {
    let t = alpha_seq.len();
    // 1-based accessor to keep the index algebra identical to the formula
    let a = |i: usize| alpha_seq[i - 1];
    let mut weights = vec![0.0; t];
    if t == 0 {
        return (weights, 1.0);
    }
    weights[t - 1] = a(t);
    for s in 1..t {
        let decay: f64 = (1..=s).map(|r| 1.0 - a(t - r + 1)).product();
        weights[t - s - 1] = a(t - s) * decay;
    }
    let init_weight = (0..t).map(|r| 1.0 - a(t - r)).product();
    (weights, init_weight)
}

/// Evaluates the unrolled form directly (no recursion).
pub fn alpha_unrolled(h_hat_seq: &[Vec<f64>], alpha_seq: &[f64], h_init: &[f64]) -> Result<Vec<f64>> {
    if h_hat_seq.len() != alpha_seq.len() {
        return Err(Error::Length {
            op: "alpha_unrolled",
            left: h_hat_seq.len(),
            right: alpha_seq.len(),
        });
    }
    if h_hat_seq.is_empty() {
        return Err(Error::Length {
            op: "alpha_unrolled (empty sequence)",
            left: 0,
            right: 1,
        });
    }
    for h in h_hat_seq {
        if h.len() != h_init.len() {
            return Err(Error::Length {
                op: "alpha_unrolled (state width)",
                left: h.len(),
                right: h_init.len(),
            });
        }
    }
    let (weights, init_weight) = unrolled_coefficients(alpha_seq);
    let mut out: Vec<f64> = h_init.iter().map(|v| init_weight * v).collect();
    for (w, h) in weights.iter().zip(h_hat_seq) {
        for (o, hv) in out.iter_mut().zip(h) {
            *o += w * hv;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case_is_single_blend() {
        let out = alpha_unrolled(&[vec![0.8, -0.4]], &[0.3], &[0.5, 1.0]).unwrap();
        assert!((out[0] - (0.3 * 0.8 + 0.7 * 0.5)).abs() < 1e-15);
        assert!((out[1] - (0.3 * -0.4 + 0.7 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn unit_alpha_forgets_older_lags() {
        // α_3 = 1 in a length-5 sequence
        let alphas = [0.2, 0.4, 1.0, 0.5, 0.7];
        let (w, init) = unrolled_coefficients(&alphas);
        assert_eq!(init, 0.0);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[1], 0.0);
        assert!(w[2] > 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(alpha_unrolled(&[vec![1.0]], &[0.5, 0.5], &[0.0]).is_err());
        assert!(alpha_unrolled(&[], &[], &[0.0]).is_err());
    }
}
