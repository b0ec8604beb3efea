//! Key-value attention for module input selection and inter-module
//! communication.
//!
//! Input attention: module hidden states form the queries; the per-step input
//! objects (one row per scalar feature, preceded by an all-zero null row)
//! form keys and values. Communication attention: active modules query the
//! hidden states of all modules and receive a projected residual update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::glorot_uniform;
use crate::matrix::{dot, matmul, softmax_backward, softmax_in_place, softmax_rows, Matrix};
use crate::params::{LeafKind, Parameters};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub attended: Matrix,
    pub weights: Matrix,
}

/// `softmax(Q Kᵀ / √d) V` with `d = Q.cols`.
pub fn scaled_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<AttentionOutput> {
    if q.cols() != k.cols() {
        return Err(Error::Shape {
            op: "scaled_attention (Q vs K)",
            left: q.shape(),
            right: k.shape(),
        });
    }
    if k.rows() != v.rows() {
        return Err(Error::Shape {
            op: "scaled_attention (K vs V)",
            left: k.shape(),
            right: v.shape(),
        });
    }
    let mut logits = matmul(q, &k.transpose())?;
    logits.scale(1.0 / (q.cols() as f64).sqrt());
    let weights = softmax_rows(&logits);
    let attended = matmul(&weights, v)?;
    Ok(AttentionOutput { attended, weights })
}

/// One 1-wide row per feature value, preceded by the all-zero null row.
pub fn build_input_objects(x: &[f64]) -> Result<Matrix> {
    if x.is_empty() {
        return Err(Error::Length {
            op: "build_input_objects",
            left: 0,
            right: 1,
        });
    }
    let mut data = Vec::with_capacity(x.len() + 1);
    data.push(0.0);
    data.extend_from_slice(x);
    Matrix::new(x.len() + 1, 1, data)
}

/// Inverted-dropout mask: each entry is `1/keep` with probability `keep`,
/// otherwise 0.
pub fn dropout_mask(rng: &mut SeededRng, rows: usize, cols: usize, keep: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        if rng.bernoulli(keep) {
            *v = 1.0 / keep;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionGeometry {
    pub heads: usize,
    /// Per-head key (and query) width.
    pub key_size: usize,
    /// Per-head value width.
    pub value_size: usize,
}

impl AttentionGeometry {
    pub fn total_key(&self) -> usize {
        self.heads * self.key_size
    }

    pub fn total_value(&self) -> usize {
        self.heads * self.value_size
    }
}

/// Per-module query maps plus shared key/value maps. `output` is the
/// projection back to the hidden width used by communication attention.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub geometry: AttentionGeometry,
    /// `modules` matrices of shape `hidden x heads·key_size`.
    pub query: Vec<Matrix>,
    /// `object_width x heads·key_size`
    pub key: Matrix,
    /// `object_width x heads·value_size`
    pub value: Matrix,
    /// `heads·value_size x hidden`
    pub output: Option<Matrix>,
}

impl AttentionParams {
    pub fn new(
        modules: usize,
        hidden: usize,
        object_width: usize,
        geometry: AttentionGeometry,
        with_output: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if geometry.heads == 0 || geometry.key_size == 0 || geometry.value_size == 0 {
            return Err(Error::Config(format!(
                "attention geometry must be positive: {geometry:?}"
            )));
        }
        let query = (0..modules)
            .map(|_| glorot_uniform(hidden, geometry.total_key(), rng))
            .collect();
        let key = glorot_uniform(object_width, geometry.total_key(), rng);
        let value = glorot_uniform(object_width, geometry.total_value(), rng);
        let output = with_output.then(|| glorot_uniform(geometry.total_value(), hidden, rng));
        Ok(Self {
            geometry,
            query,
            key,
            value,
            output,
        })
    }

    pub fn modules(&self) -> usize {
        self.query.len()
    }

    fn scale(&self) -> f64 {
        1.0 / (self.geometry.key_size as f64).sqrt()
    }
}

impl Parameters for AttentionParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(String, LeafKind, &'a Matrix)) {
        for (k, q) in self.query.iter().enumerate() {
            f(format!("query.{k}"), LeafKind::Weight, q);
        }
        f("key".into(), LeafKind::Weight, &self.key);
        f("value".into(), LeafKind::Weight, &self.value);
        if let Some(o) = &self.output {
            f("output".into(), LeafKind::Weight, o);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(String, LeafKind, &mut Matrix)) {
        for (k, q) in self.query.iter_mut().enumerate() {
            f(format!("query.{k}"), LeafKind::Weight, q);
        }
        f("key".into(), LeafKind::Weight, &mut self.key);
        f("value".into(), LeafKind::Weight, &mut self.value);
        if let Some(o) = &mut self.output {
            f("output".into(), LeafKind::Weight, o);
        }
    }
}

/// Forward record for one multi-head attention read.
#[derive(Debug, Clone)]
struct HeadRead {
    /// Indices of the key rows that were attended over.
    keys: Vec<usize>,
    /// Softmax weights, one row per head, aligned with `keys`.
    weights: Vec<Vec<f64>>,
}

/// Multi-head read for a single query row over `key_rows` of the shared
/// key/value matrices. Returns the concatenated head outputs.
fn read(
    g: &AttentionGeometry,
    scale: f64,
    query: &[f64],
    keys: &Matrix,
    values: &Matrix,
    key_rows: Vec<usize>,
) -> (Vec<f64>, HeadRead) {
    let mut out = vec![0.0; g.total_value()];
    let mut weights = Vec::with_capacity(g.heads);
    for head in 0..g.heads {
        let qk = &query[head * g.key_size..(head + 1) * g.key_size];
        let mut w: Vec<f64> = key_rows
            .iter()
            .map(|&i| dot(qk, &keys.row(i)[head * g.key_size..(head + 1) * g.key_size]) * scale)
            .collect();
        if !w.is_empty() {
            softmax_in_place(&mut w);
        }
        let dst = &mut out[head * g.value_size..(head + 1) * g.value_size];
        for (&i, wi) in key_rows.iter().zip(&w) {
            let v = &values.row(i)[head * g.value_size..(head + 1) * g.value_size];
            for (d, vv) in dst.iter_mut().zip(v) {
                *d += wi * vv;
            }
        }
        weights.push(w);
    }
    (
        out,
        HeadRead {
            keys: key_rows,
            weights,
        },
    )
}

/// Reverse of [`read`]: accumulates into `d_query`, `d_keys`, `d_values`.
#[allow(clippy::too_many_arguments)]
fn read_backward(
    g: &AttentionGeometry,
    scale: f64,
    query: &[f64],
    keys: &Matrix,
    values: &Matrix,
    rec: &HeadRead,
    d_out: &[f64],
    d_query: &mut [f64],
    d_keys: &mut Matrix,
    d_values: &mut Matrix,
) {
    for head in 0..g.heads {
        let ks = head * g.key_size..(head + 1) * g.key_size;
        let vs = head * g.value_size..(head + 1) * g.value_size;
        let w = &rec.weights[head];
        let d_att = &d_out[vs.clone()];
        let mut dw = Vec::with_capacity(w.len());
        for (&i, wi) in rec.keys.iter().zip(w) {
            dw.push(dot(d_att, &values.row(i)[vs.clone()]));
            for (dv, da) in d_values.row_mut(i)[vs.clone()].iter_mut().zip(d_att) {
                *dv += wi * da;
            }
        }
        let ds = softmax_backward(w, &dw);
        let qk = &query[ks.clone()];
        for (&i, dsi) in rec.keys.iter().zip(&ds) {
            let s = dsi * scale;
            if s == 0.0 {
                continue;
            }
            let key_row = &keys.row(i)[ks.clone()];
            for (dq, kv) in d_query[ks.clone()].iter_mut().zip(key_row) {
                *dq += s * kv;
            }
            for (dk, qv) in d_keys.row_mut(i)[ks.clone()].iter_mut().zip(qk) {
                *dk += s * qv;
            }
        }
    }
}

fn check_states(h: &Matrix, p: &AttentionParams, op: &'static str) -> Result<()> {
    if h.rows() != p.modules() || h.cols() != p.query[0].rows() {
        return Err(Error::Shape {
            op,
            left: h.shape(),
            right: (p.modules(), p.query[0].rows()),
        });
    }
    Ok(())
}

fn check_mask(mask: Option<&Matrix>, shape: (usize, usize), op: &'static str) -> Result<()> {
    match mask {
        Some(m) if m.shape() != shape => Err(Error::Shape {
            op,
            left: m.shape(),
            right: shape,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct InputAttentionCache {
    objects: Matrix,
    keys: Matrix,
    values: Matrix,
    h: Matrix,
    queries: Vec<Vec<f64>>,
    reads: Vec<HeadRead>,
    mask: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct InputAttention {
    /// `modules x heads·value_size`, dropout already applied.
    pub attended: Matrix,
    /// Softmax mass each module puts on the null row, averaged over heads.
    pub null_weight: Vec<f64>,
    pub cache: InputAttentionCache,
}

impl InputAttention {
    /// Per-module, per-head weights over the input objects (null row first).
    pub fn weights(&self, module: usize) -> &[Vec<f64>] {
        &self.cache.reads[module].weights
    }
}

/// `softmax(h_k W_kᵠ (X Wᵉ)ᵀ / √d) X Wᵛ` for every module `k`, all heads
/// concatenated. `mask` is an inverted-dropout mask over the result.
pub fn input_attention(
    h: &Matrix,
    objects: &Matrix,
    p: &AttentionParams,
    mask: Option<&Matrix>,
) -> Result<InputAttention> {
    check_states(h, p, "input_attention states")?;
    let keys = matmul(objects, &p.key)?;
    let values = matmul(objects, &p.value)?;
    let g = p.geometry;
    let modules = p.modules();
    check_mask(mask, (modules, g.total_value()), "input_attention mask")?;
    let mut attended = Matrix::zeros(modules, g.total_value());
    let mut null_weight = Vec::with_capacity(modules);
    let mut queries = Vec::with_capacity(modules);
    let mut reads = Vec::with_capacity(modules);
    for k in 0..modules {
        let q = p.query[k].vecmat(h.row(k))?;
        let (out, rec) = read(&g, p.scale(), &q, &keys, &values, (0..objects.rows()).collect());
        null_weight.push(rec.weights.iter().map(|w| w[0]).sum::<f64>() / g.heads as f64);
        let row = attended.row_mut(k);
        row.copy_from_slice(&out);
        if let Some(m) = mask {
            row.iter_mut().zip(m.row(k)).for_each(|(a, s)| *a *= s);
        }
        queries.push(q);
        reads.push(rec);
    }
    Ok(InputAttention {
        attended,
        null_weight,
        cache: InputAttentionCache {
            objects: objects.clone(),
            keys,
            values,
            h: h.clone(),
            queries,
            reads,
            mask: mask.cloned(),
        },
    })
}

/// Accumulates parameter gradients and returns `∂L/∂h` (`modules x hidden`).
pub fn input_attention_backward(
    p: &AttentionParams,
    cache: &InputAttentionCache,
    d_attended: &Matrix,
    grads: &mut AttentionParams,
) -> Matrix {
    let g = p.geometry;
    let mut d_keys = Matrix::zeros(cache.keys.rows(), cache.keys.cols());
    let mut d_values = Matrix::zeros(cache.values.rows(), cache.values.cols());
    let mut dh = Matrix::zeros(cache.h.rows(), cache.h.cols());
    for k in 0..p.modules() {
        let mut d_out = d_attended.row(k).to_vec();
        if let Some(m) = &cache.mask {
            d_out.iter_mut().zip(m.row(k)).for_each(|(d, s)| *d *= s);
        }
        if d_out.iter().all(|v| *v == 0.0) {
            continue;
        }
        let mut dq = vec![0.0; g.total_key()];
        read_backward(
            &g,
            p.scale(),
            &cache.queries[k],
            &cache.keys,
            &cache.values,
            &cache.reads[k],
            &d_out,
            &mut dq,
            &mut d_keys,
            &mut d_values,
        );
        grads.query[k].add_outer(cache.h.row(k), &dq, 1.0);
        let dhk = p.query[k].matvec(&dq).expect("query shape");
        dh.row_mut(k).iter_mut().zip(&dhk).for_each(|(a, b)| *a += b);
    }
    for i in 0..cache.objects.rows() {
        grads.key.add_outer(cache.objects.row(i), d_keys.row(i), 1.0);
        grads.value.add_outer(cache.objects.row(i), d_values.row(i), 1.0);
    }
    dh
}

#[derive(Debug, Clone)]
pub struct CommunicationCache {
    h: Matrix,
    keys: Matrix,
    values: Matrix,
    active: Vec<usize>,
    queries: Vec<Vec<f64>>,
    reads: Vec<HeadRead>,
    /// Concatenated head outputs per active module, after dropout.
    reads_out: Vec<Vec<f64>>,
    mask: Option<Matrix>,
}

/// Residual deltas for the active modules; rows of inactive modules are zero.
///
/// Active module `k` queries the hidden states of all modules (itself
/// included when `include_self` is set); its concatenated head outputs are
/// projected back to the hidden width by `p.output`.
pub fn communication_attention(
    h_all: &Matrix,
    active: &[usize],
    p: &AttentionParams,
    include_self: bool,
    mask: Option<&Matrix>,
) -> Result<(Matrix, CommunicationCache)> {
    check_states(h_all, p, "communication_attention states")?;
    let output = p
        .output
        .as_ref()
        .ok_or_else(|| Error::Config("communication attention needs an output projection".into()))?;
    let g = p.geometry;
    let modules = p.modules();
    check_mask(mask, (modules, g.total_value()), "communication mask")?;
    if let Some(&bad) = active.iter().find(|&&k| k >= modules) {
        return Err(Error::Config(format!(
            "active module {bad} out of range for {modules} modules"
        )));
    }
    let keys = matmul(h_all, &p.key)?;
    let values = matmul(h_all, &p.value)?;
    let mut delta = Matrix::zeros(modules, h_all.cols());
    let mut queries = Vec::with_capacity(active.len());
    let mut reads = Vec::with_capacity(active.len());
    let mut reads_out = Vec::with_capacity(active.len());
    for &k in active {
        let q = p.query[k].vecmat(h_all.row(k))?;
        let rows = (0..modules).filter(|&i| include_self || i != k).collect();
        let (mut out, rec) = read(&g, p.scale(), &q, &keys, &values, rows);
        if let Some(m) = mask {
            out.iter_mut().zip(m.row(k)).for_each(|(a, s)| *a *= s);
        }
        delta.row_mut(k).copy_from_slice(&output.vecmat(&out)?);
        queries.push(q);
        reads.push(rec);
        reads_out.push(out);
    }
    Ok((
        delta,
        CommunicationCache {
            h: h_all.clone(),
            keys,
            values,
            active: active.to_vec(),
            queries,
            reads,
            reads_out,
            mask: mask.cloned(),
        },
    ))
}

/// Accumulates parameter gradients and returns `∂L/∂h_all` through the
/// deltas only (the caller adds the residual identity path).
pub fn communication_backward(
    p: &AttentionParams,
    cache: &CommunicationCache,
    d_delta: &Matrix,
    grads: &mut AttentionParams,
) -> Matrix {
    let g = p.geometry;
    let output = p.output.as_ref().expect("checked in forward");
    let mut d_keys = Matrix::zeros(cache.keys.rows(), cache.keys.cols());
    let mut d_values = Matrix::zeros(cache.values.rows(), cache.values.cols());
    let mut dh = Matrix::zeros(cache.h.rows(), cache.h.cols());
    for (slot, &k) in cache.active.iter().enumerate() {
        let dd = d_delta.row(k);
        if let Some(go) = grads.output.as_mut() {
            go.add_outer(&cache.reads_out[slot], dd, 1.0);
        }
        let mut d_out = output.matvec(dd).expect("output shape");
        if let Some(m) = &cache.mask {
            d_out.iter_mut().zip(m.row(k)).for_each(|(d, s)| *d *= s);
        }
        let mut dq = vec![0.0; g.total_key()];
        read_backward(
            &g,
            p.scale(),
            &cache.queries[slot],
            &cache.keys,
            &cache.values,
            &cache.reads[slot],
            &d_out,
            &mut dq,
            &mut d_keys,
            &mut d_values,
        );
        grads.query[k].add_outer(cache.h.row(k), &dq, 1.0);
        let dhk = p.query[k].matvec(&dq).expect("query shape");
        dh.row_mut(k).iter_mut().zip(&dhk).for_each(|(a, b)| *a += b);
    }
    for i in 0..cache.h.rows() {
        grads.key.add_outer(cache.h.row(i), d_keys.row(i), 1.0);
        grads.value.add_outer(cache.h.row(i), d_values.row(i), 1.0);
        let from_keys = p.key.matvec(d_keys.row(i)).expect("key shape");
        let from_values = p.value.matvec(d_values.row(i)).expect("value shape");
        for ((d, a), b) in dh.row_mut(i).iter_mut().zip(&from_keys).zip(&from_values) {
            *d += a + b;
        }
    }
    dh
}
