#![allow(dead_code)]

use alpha_rim::SeededRng;

/// Central differences, written independently of the library's own helper.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(mut f: F, theta: &[f64], eps: f64) -> Vec<f64> {
    let mut point = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = point[i];
            point[i] = orig + eps;
            let plus = f(&point);
            point[i] = orig - eps;
            let minus = f(&point);
            point[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub fn random_seq(rng: &mut SeededRng, len: usize, width: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..width).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect()
}
