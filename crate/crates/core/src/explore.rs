//! Value- and uncertainty-weighted choice among affordance modes.
//!
//! `p(i) ∝ exp(β·V_i)·c_i`, and each selection decays its entry as
//! `c ← max((1 − α)·c, c_min)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExploreError {
    #[error("empty mode list")]
    Empty,
    #[error("{values} values but {uncertainties} uncertainties")]
    LengthMismatch { values: usize, uncertainties: usize },
    #[error("uncertainty {value} at mode {index} is not positive")]
    NonPositiveUncertainty { index: usize, value: f64 },
    #[error("non-finite input {value} at mode {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("malformed distribution: {reason}")]
    Malformed { reason: &'static str },
    #[error("no uncertainty entry for primitive {primitive}, mode {mode}")]
    MissingEntry { primitive: usize, mode: usize },
    #[error("invalid selection config: {0}")]
    Config(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub beta: f64,
    pub alpha: f64,
    pub c_min: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { beta: 2.0, alpha: 0.05, c_min: 0.05 }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ExploreError::Config("beta must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ExploreError::Config("alpha must lie in (0, 1)"));
        }
        if !(self.c_min > 0.0 && self.c_min <= 1.0) {
            return Err(ExploreError::Config("c_min must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub fn selection_distribution(values: &[f64], uncertainties: &[f64], beta: f64) -> Result<Vec<f64>, ExploreError> {
    if values.is_empty() {
        return Err(ExploreError::Empty);
    }
    if values.len() != uncertainties.len() {
        return Err(ExploreError::LengthMismatch { values: values.len(), uncertainties: uncertainties.len() });
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(ExploreError::NonFinite { index, value });
        }
    }
    for (index, &value) in uncertainties.iter().enumerate() {
        if !value.is_finite() {
            return Err(ExploreError::NonFinite { index, value });
        }
        if value <= 0.0 {
            return Err(ExploreError::NonPositiveUncertainty { index, value });
        }
    }
    let top = values.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = values.iter().zip(uncertainties).map(|(v, c)| libm::exp(beta * v - top) * c).collect();
    let z: f64 = p.iter().sum();
    for x in &mut p {
        *x /= z;
    }
    Ok(p)
}

fn check_distribution(dist: &[f64]) -> Result<(), ExploreError> {
    if dist.is_empty() {
        return Err(ExploreError::Empty);
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(ExploreError::Malformed { reason: "entries must be finite and non-negative" });
    }
    let s: f64 = dist.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(ExploreError::Malformed { reason: "probabilities do not sum to 1" });
    }
    Ok(())
}

/// Inverse-CDF draw; consumes exactly one uniform from `rng`.
pub fn select_mode(dist: &[f64], rng: &mut CounterRng) -> Result<usize, ExploreError> {
    check_distribution(dist)?;
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc && *p > 0.0 {
            return Ok(i);
        }
    }
    Ok(dist.iter().rposition(|&p| p > 0.0).expect("some mass"))
}

/// Most probable mode; the lowest index wins ties.
pub fn greedy_mode(dist: &[f64]) -> Result<usize, ExploreError> {
    check_distribution(dist)?;
    let mut best = 0;
    for (i, p) in dist.iter().enumerate() {
        if *p > dist[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Per-primitive, per-mode uncertainties and selection counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTable {
    pub c: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
}

impl UncertaintyTable {
    pub fn new(modes_per_primitive: &[usize]) -> Self {
        UncertaintyTable {
            c: modes_per_primitive.iter().map(|&m| vec![1.0; m]).collect(),
            counts: modes_per_primitive.iter().map(|&m| vec![0; m]).collect(),
        }
    }

    pub fn primitives(&self) -> usize {
        self.c.len()
    }

    pub fn uncertainties(&self, primitive: usize) -> Result<&[f64], ExploreError> {
        self.c.get(primitive).map(|v| v.as_slice()).ok_or(ExploreError::MissingEntry { primitive, mode: 0 })
    }

    pub fn get(&self, primitive: usize, mode: usize) -> Result<f64, ExploreError> {
        self.c
            .get(primitive)
            .and_then(|row| row.get(mode))
            .copied()
            .ok_or(ExploreError::MissingEntry { primitive, mode })
    }

    pub fn count(&self, primitive: usize, mode: usize) -> Result<u64, ExploreError> {
        self.counts
            .get(primitive)
            .and_then(|row| row.get(mode))
            .copied()
            .ok_or(ExploreError::MissingEntry { primitive, mode })
    }

    /// Applies the decay to the selected entry and bumps its count.
    pub fn update(&mut self, primitive: usize, mode: usize, cfg: &SelectionConfig) -> Result<f64, ExploreError> {
        let c = self
            .c
            .get_mut(primitive)
            .and_then(|row| row.get_mut(mode))
            .ok_or(ExploreError::MissingEntry { primitive, mode })?;
        *c = ((1.0 - cfg.alpha) * *c).max(cfg.c_min);
        let out = *c;
        self.counts[primitive][mode] += 1;
        Ok(out)
    }
}
