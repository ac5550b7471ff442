use serde::Serialize;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Probability vector over A symbols, either a true distribution or an
/// empirical one with denominator `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_n: Option<u64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("distribution needs at least one symbol"));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::domain(format!(
                "probabilities must be finite and non-negative, got {bad}"
            )));
        }
        let total: f64 = crate::numeric::compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::domain(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Distribution {
            probs,
            empirical_n: None,
        })
    }

    pub(crate) fn empirical(probs: Vec<f64>, n: u64) -> Self {
        Distribution {
            probs,
            empirical_n: Some(n),
        }
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

    /// Denominator when the distribution is an MLE from counts.
    pub fn empirical_n(&self) -> Option<u64> {
        self.empirical_n
    }

    /// p_[1], the largest probability.
    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Probabilities in non-increasing order.
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.probs.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Indices attaining the maximum exactly.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.max_prob();
        (0..self.probs.len())
            .filter(|&i| self.probs[i] == max)
            .collect()
    }

    /// The unique most probable symbol, if there is one.
    pub fn unique_argmax(&self) -> Option<usize> {
        match self.argmax_set().as_slice() {
            [i] => Some(*i),
            _ => None,
        }
    }
}
