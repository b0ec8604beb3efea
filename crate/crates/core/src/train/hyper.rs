use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaselineConfig, ModelConfig, ModelKind};
use crate::rim::{RimConfig, HORIZON};
use crate::rng::SeededRng;

pub const UNITS: [usize; 16] = [2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 25, 30, 35, 40, 45, 50];
pub const NUM_RIMS: [usize; 6] = [4, 6, 8, 10, 12, 14];
pub const K_MODULES: [usize; 6] = [4, 6, 8, 10, 12, 14];
/// Shared list for every key, value and query size.
pub const SIZES: [usize; 5] = [4, 6, 8, 10, 12];
pub const KEEP_PROBS: [f64; 4] = [0.6, 0.7, 0.8, 0.9];
pub const COMM_HEADS: [usize; 4] = [2, 4, 6, 8];

pub const BASELINE_L1: [f64; 4] = [1e-4, 1e-3, 1e-2, 0.10];
pub const BASELINE_DROPOUT: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
/// Desk-scale subset of the baseline grid.
pub const REDUCED_UNITS: [usize; 3] = [10, 25, 50];
pub const REDUCED_L1: [f64; 2] = [1e-4, 1e-2];
pub const REDUCED_DROPOUT: [f64; 2] = [0.1, 0.3];

pub fn baseline_units() -> Vec<usize> {
    (5..=250).step_by(5).collect()
}

/// One draw from the twelve-parameter α_t-RIM grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RimHyper {
    pub units: usize,
    pub num_rims: usize,
    pub k_modules: usize,
    pub input_key_size: usize,
    pub input_value_size: usize,
    pub input_query_size: usize,
    pub input_keep_prob: f64,
    pub comm_heads: usize,
    pub comm_key_size: usize,
    pub comm_value_size: usize,
    pub comm_query_size: usize,
    pub comm_keep_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineHyper {
    pub units: usize,
    pub l1: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperDict {
    Rim(RimHyper),
    Baseline(BaselineHyper),
}

impl RimHyper {
    /// Every field is a member of its grid list.
    pub fn in_grid(&self) -> bool {
        UNITS.contains(&self.units)
            && NUM_RIMS.contains(&self.num_rims)
            && K_MODULES.contains(&self.k_modules)
            && [
                self.input_key_size,
                self.input_value_size,
                self.input_query_size,
                self.comm_key_size,
                self.comm_value_size,
                self.comm_query_size,
            ]
            .iter()
            .all(|s| SIZES.contains(s))
            && KEEP_PROBS.contains(&self.input_keep_prob)
            && KEEP_PROBS.contains(&self.comm_keep_prob)
            && COMM_HEADS.contains(&self.comm_heads)
    }

    /// Active modules cannot outnumber modules, and dot-product attention
    /// needs queries and keys of equal width.
    pub fn feasible(&self) -> bool {
        self.num_rims <= self.k_modules
            && self.input_query_size == self.input_key_size
            && self.comm_query_size == self.comm_key_size
    }

    pub fn to_config(&self, lookback: usize, features: usize) -> RimConfig {
        RimConfig {
            units: self.units,
            num_modules: self.k_modules,
            num_active: self.num_rims,
            input_heads: 1,
            input_key_size: self.input_key_size,
            input_value_size: self.input_value_size,
            input_query_size: self.input_query_size,
            input_keep_prob: self.input_keep_prob,
            comm_heads: self.comm_heads,
            comm_key_size: self.comm_key_size,
            comm_value_size: self.comm_value_size,
            comm_query_size: self.comm_query_size,
            comm_keep_prob: self.comm_keep_prob,
            lookback,
            horizon: HORIZON,
            features,
            include_self_in_comm: true,
        }
    }

    fn key(&self) -> [u64; 12] {
        [
            self.units as u64,
            self.num_rims as u64,
            self.k_modules as u64,
            self.input_key_size as u64,
            self.input_value_size as u64,
            self.input_query_size as u64,
            self.input_keep_prob.to_bits(),
            self.comm_heads as u64,
            self.comm_key_size as u64,
            self.comm_value_size as u64,
            self.comm_query_size as u64,
            self.comm_keep_prob.to_bits(),
        ]
    }
}

impl BaselineHyper {
    pub fn in_grid(&self) -> bool {
        baseline_units().contains(&self.units)
            && BASELINE_L1.contains(&self.l1)
            && BASELINE_DROPOUT.contains(&self.dropout)
    }

    pub fn to_config(&self, lookback: usize, features: usize) -> BaselineConfig {
        BaselineConfig {
            units: self.units,
            l1: self.l1,
            dropout: self.dropout,
            lookback,
            horizon: HORIZON,
            features,
        }
    }
}

impl HyperDict {
    pub fn satisfies_constraints(&self) -> bool {
        match self {
            HyperDict::Rim(h) => h.in_grid() && h.feasible(),
            HyperDict::Baseline(h) => h.in_grid(),
        }
    }

    pub fn to_model_config(&self, kind: ModelKind, lookback: usize, features: usize) -> Result<ModelConfig> {
        match (self, kind) {
            (HyperDict::Rim(h), ModelKind::AlphaTRim) => {
                Ok(ModelConfig::AlphaTRim(h.to_config(lookback, features)))
            }
            (HyperDict::Baseline(h), ModelKind::Rnn) => Ok(ModelConfig::Rnn(h.to_config(lookback, features))),
            (HyperDict::Baseline(h), ModelKind::Lstm) => Ok(ModelConfig::Lstm(h.to_config(lookback, features))),
            _ => Err(Error::Config(format!("hyper dict does not apply to {kind}"))),
        }
    }
}

fn pick<T: Copy>(rng: &mut SeededRng, list: &[T]) -> T {
    list[rng.below(list.len())]
}

/// Number of distinct feasible α_t-RIM dicts.
pub fn rim_grid_size() -> usize {
    let pairs = NUM_RIMS
        .iter()
        .map(|r| K_MODULES.iter().filter(|k| r <= k).count())
        .sum::<usize>();
    let s = SIZES.len();
    UNITS.len() * pairs * (s * s) * (s * s) * KEEP_PROBS.len().pow(2) * COMM_HEADS.len()
}

/// `n` distinct α_t-RIM dicts by rejection sampling the full cartesian grid.
pub fn sample_hyper_dicts(rng: &mut SeededRng, n: usize) -> Result<Vec<HyperDict>> {
    if n > rim_grid_size() {
        return Err(Error::Config(format!(
            "requested {n} distinct dicts from a grid of {}",
            rim_grid_size()
        )));
    }
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let h = RimHyper {
            units: pick(rng, &UNITS),
            num_rims: pick(rng, &NUM_RIMS),
            k_modules: pick(rng, &K_MODULES),
            input_key_size: pick(rng, &SIZES),
            input_value_size: pick(rng, &SIZES),
            input_query_size: pick(rng, &SIZES),
            input_keep_prob: pick(rng, &KEEP_PROBS),
            comm_heads: pick(rng, &COMM_HEADS),
            comm_key_size: pick(rng, &SIZES),
            comm_value_size: pick(rng, &SIZES),
            comm_query_size: pick(rng, &SIZES),
            comm_keep_prob: pick(rng, &KEEP_PROBS),
        };
        if h.feasible() && seen.insert(h.key()) {
            out.push(HyperDict::Rim(h));
        }
    }
    Ok(out)
}

/// Cartesian baseline grid in units, L1, dropout order.
pub fn baseline_grid(reduced: bool) -> Vec<HyperDict> {
    let (units, l1s, dropouts): (Vec<usize>, &[f64], &[f64]) = if reduced {
        (REDUCED_UNITS.to_vec(), &REDUCED_L1, &REDUCED_DROPOUT)
    } else {
        (baseline_units(), &BASELINE_L1, &BASELINE_DROPOUT)
    };
    let mut out = Vec::with_capacity(units.len() * l1s.len() * dropouts.len());
    for &u in &units {
        for &l1 in l1s {
            for &dropout in dropouts {
                out.push(HyperDict::Baseline(BaselineHyper { units: u, l1, dropout }));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lists() {
        assert_eq!(baseline_units().len(), 50);
        assert_eq!(*baseline_units().last().unwrap(), 250);
        assert_eq!(baseline_grid(false).len(), 50 * 4 * 6);
        assert!(baseline_grid(true).iter().all(HyperDict::satisfies_constraints));
    }

    #[test]
    fn sampling_is_reproducible_and_distinct() {
        let a = sample_hyper_dicts(&mut SeededRng::new(5), 200).unwrap();
        let b = sample_hyper_dicts(&mut SeededRng::new(5), 200).unwrap();
        assert_eq!(a, b);
        let keys: HashSet<_> = a
            .iter()
            .map(|h| match h {
                HyperDict::Rim(r) => r.key(),
                HyperDict::Baseline(_) => unreachable!(),
            })
            .collect();
        assert_eq!(keys.len(), 200);
    }

    #[test]
    fn sampled_configs_validate() {
        for h in sample_hyper_dicts(&mut SeededRng::new(9), 50).unwrap() {
            let cfg = h.to_model_config(ModelKind::AlphaTRim, 10, 2).unwrap();
            cfg.validate().unwrap();
        }
    }
}
