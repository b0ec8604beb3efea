//! Named parameter leaves and the generic operations built on them
//! (flattening, L1 norms, gradient accumulation).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How a leaf participates in regularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeafKind {
    /// Subject to the L1 penalty.
    Weight,
    Bias,
    /// Static smoothing coefficient of the α-RNN.
    Smoothing,
}

/// A tree of named matrices visited in a fixed order.
///
/// Gradient containers are the same type as the parameters they describe, so
/// every helper in this module works for both.
pub trait Parameters: Clone {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix));
    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix));
}

pub fn num_params<P: Parameters>(p: &P) -> usize {
    let mut n = 0;
    p.visit(&mut |_, _, m| n += m.data().len());
    n
}

pub fn flatten<P: Parameters>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(num_params(p));
    p.visit(&mut |_, _, m| out.extend_from_slice(m.data()));
    out
}

pub fn assign_flat<P: Parameters>(p: &mut P, values: &[f64]) -> Result<()> {
    let expected = num_params(p);
    if values.len() != expected {
        return Err(Error::Length {
            op: "assign_flat",
            left: values.len(),
            right: expected,
        });
    }
    let mut offset = 0;
    p.visit_mut(&mut |_, _, m| {
        let n = m.data().len();
        m.data_mut().copy_from_slice(&values[offset..offset + n]);
        offset += n;
    });
    Ok(())
}

pub fn zeros_like<P: Parameters>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut(&mut |_, _, m| m.fill(0.0));
    z
}

/// `dst += scale · src`; both trees must share a layout.
pub fn add_scaled<P: Parameters>(dst: &mut P, src: &P, scale: f64) {
    let flat = flatten(src);
    let mut offset = 0;
    dst.visit_mut(&mut |_, _, m| {
        let n = m.data().len();
        for (d, s) in m.data_mut().iter_mut().zip(&flat[offset..offset + n]) {
            *d += scale * s;
        }
        offset += n;
    });
    debug_assert_eq!(offset, flat.len());
}

pub fn scale<P: Parameters>(p: &mut P, s: f64) {
    p.visit_mut(&mut |_, _, m| m.scale(s));
}

/// Sum of absolute values over [`LeafKind::Weight`] leaves.
pub fn l1_norm<P: Parameters>(p: &P) -> f64 {
    let mut total = 0.0;
    p.visit(&mut |_, kind, m| {
        if kind == LeafKind::Weight {
            total += m.data().iter().map(|v| v.abs()).sum::<f64>();
        }
    });
    total
}

/// Adds `weight · sign(w)` to the weight leaves of `grads`.
pub fn add_l1_grad<P: Parameters>(grads: &mut P, params: &P, weight: f64) {
    if weight == 0.0 {
        return;
    }
    let mut signs = Vec::new();
    params.visit(&mut |_, kind, m| {
        if kind == LeafKind::Weight {
            signs.extend(m.data().iter().map(|v| sign(*v)));
        }
    });
    let mut offset = 0;
    grads.visit_mut(&mut |_, kind, m| {
        if kind == LeafKind::Weight {
            let n = m.data().len();
            for (g, s) in m.data_mut().iter_mut().zip(&signs[offset..offset + n]) {
                *g += weight * s;
            }
            offset += n;
        }
    });
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn all_finite<P: Parameters>(p: &P) -> bool {
    let mut ok = true;
    p.visit(&mut |_, _, m| ok &= m.is_finite());
    ok
}

/// Serializable snapshot of one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub kind: LeafKind,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn named_tensors<P: Parameters>(p: &P) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    p.visit(&mut |name, kind, m| {
        out.push(NamedTensor {
            name,
            kind,
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        })
    });
    out
}

/// Copies tensors into `p` by name, rejecting missing names, extras and
/// shape disagreements.
pub fn load_named<P: Parameters>(p: &mut P, tensors: &[NamedTensor]) -> Result<()> {
    use std::collections::HashMap;
    let by_name: HashMap<&str, &NamedTensor> =
        tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    if by_name.len() != tensors.len() {
        return Err(Error::Checkpoint("duplicate tensor names".into()));
    }
    let mut problem: Option<String> = None;
    let mut seen = 0;
    p.visit_mut(&mut |name, _, m| {
        if problem.is_some() {
            return;
        }
        match by_name.get(name.as_str()) {
            None => problem = Some(format!("missing tensor {name}")),
            Some(t) if (t.rows, t.cols) != m.shape() || t.data.len() != t.rows * t.cols => {
                problem = Some(format!(
                    "tensor {name}: stored shape {}x{} but model expects {}x{}",
                    t.rows,
                    t.cols,
                    m.rows(),
                    m.cols()
                ))
            }
            Some(t) => {
                m.data_mut().copy_from_slice(&t.data);
                seen += 1;
            }
        }
    });
    if let Some(msg) = problem {
        return Err(Error::Checkpoint(msg));
    }
    if seen != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model uses {seen}",
            tensors.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    #[derive(Clone)]
    pub struct Pair {
        pub w: Matrix,
        pub b: Matrix,
    }

    impl Parameters for Pair {
        fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
            f("w".into(), LeafKind::Weight, &self.w);
            f("b".into(), LeafKind::Bias, &self.b);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
            f("w".into(), LeafKind::Weight, &mut self.w);
            f("b".into(), LeafKind::Bias, &mut self.b);
        }
    }

    fn pair() -> Pair {
        Pair {
            w: Matrix::from_rows(&[vec![1.0, -2.0], vec![0.0, 3.0]]).unwrap(),
            b: Matrix::row_vector(&[-5.0, 5.0]).unwrap(),
        }
    }

    #[test]
    fn l1_excludes_biases() {
        assert_eq!(l1_norm(&pair()), 6.0);
    }

    #[test]
    fn flat_roundtrip() {
        let p = pair();
        let mut q = zeros_like(&p);
        assign_flat(&mut q, &flatten(&p)).unwrap();
        assert_eq!(flatten(&q), flatten(&p));
        assert!(assign_flat(&mut q, &[1.0]).is_err());
    }

    #[test]
    fn load_rejects_shape_mismatch() {
        let p = pair();
        let mut tensors = named_tensors(&p);
        let mut q = zeros_like(&p);
        load_named(&mut q, &tensors).unwrap();
        assert_eq!(flatten(&q), flatten(&p));
        tensors[0].rows = 1;
        tensors[0].cols = 4;
        assert!(load_named(&mut q, &tensors).is_err());
    }

    #[test]
    fn l1_grad_uses_sign() {
        let p = pair();
        let mut g = zeros_like(&p);
        add_l1_grad(&mut g, &p, 0.5);
        assert_eq!(g.w.data(), &[0.5, -0.5, 0.0, 0.5]);
        assert_eq!(g.b.data(), &[0.0, 0.0]);
    }
}
