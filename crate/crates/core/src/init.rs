//! Weight initializers: Glorot uniform for feed-forward weights, orthogonal
//! for square recurrence matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    GlorotUniform,
    Orthogonal,
    Zeros,
}

impl InitSpec {
    pub fn build(self, rows: usize, cols: usize, rng: &mut SeededRng) -> Result<Matrix> {
        match self {
            InitSpec::GlorotUniform => Ok(glorot_uniform(rows, cols, rng)),
            InitSpec::Orthogonal => {
                if rows != cols {
                    return Err(Error::Config(format!(
                        "orthogonal init needs a square target, got {rows}x{cols}"
                    )));
                }
                Ok(orthogonal_init(rows, rng))
            }
            InitSpec::Zeros => Ok(Matrix::zeros(rows, cols)),
        }
    }
}

pub fn glorot_limit(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Entries i.i.d. uniform on `[-L, L]` with `L = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let limit = glorot_limit(rows, cols);
    rng.uniform_matrix(rows, cols, -limit, limit)
}

/// Orthogonal `n x n` matrix from modified Gram-Schmidt over a Gaussian draw.
///
/// Columns that become numerically dependent are redrawn, so the result is
/// always orthogonal.
pub fn orthogonal_init(n: usize, rng: &mut SeededRng) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        // two passes of MGS ("twice is enough") for full working precision
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut m = Matrix::zeros(n, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m.set(r, c, *v);
        }
    }
    m
}
