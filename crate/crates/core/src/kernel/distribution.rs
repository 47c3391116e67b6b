use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Probability vector over a state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validate nonnegativity and unit mass (within [`MASS_TOLERANCE`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidDistribution(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "mass is {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalize nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// Normalize log-weights with a log-sum-exp shift.
    pub fn from_log_weights(logw: &[f64]) -> Result<Self> {
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidDistribution("no finite log-weight".into()));
        }
        Self::from_weights(logw.iter().map(|&l| (l - max).exp()).collect())
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub(crate) fn from_raw_renormalized(mut probs: Vec<f64>) -> Self {
        for p in &mut probs {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
