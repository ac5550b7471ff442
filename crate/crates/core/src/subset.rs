//! Confidence subsets `{u : p̂_u ≥ p̂_[1] - width}` built from win counts.

use std::collections::HashSet;

use serde::Serialize;

use crate::bounds::{
    asymptotic_width, choose_m, AsymptoticQuantile, DataDependentBound, WidthResult,
};
use crate::distribution::Distribution;
use crate::error::{check_probability, Error, Result};

/// Slack on the membership boundary; count ratios that tie exactly must land
/// inside.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-12;

/// Win tallies per symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WinCounts {
    labels: Vec<String>,
    counts: Vec<u64>,
    n: u64,
}

impl WinCounts {
    pub fn new(labels: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::input("at least one symbol is required"));
        }
        if labels.len() != counts.len() {
            return Err(Error::input(format!(
                "{} labels but {} counts",
                labels.len(),
                counts.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::input(format!("duplicate label '{l}'")));
            }
        }
        let n = counts.iter().sum();
        Ok(WinCounts { labels, counts, n })
    }

    /// Counts labelled "1", "2", ... in order.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let labels = (1..=counts.len()).map(|i| i.to_string()).collect();
        let n = counts.iter().sum();
        WinCounts { labels, counts, n }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn winner_indices(&self) -> Vec<usize> {
        let max = self.max_count();
        (0..self.counts.len())
            .filter(|&i| self.counts[i] == max)
            .collect()
    }
}

/// Maximum likelihood estimate p̂_u = N_u / n.
pub fn mle(counts: &WinCounts) -> Result<Distribution> {
    if counts.n == 0 {
        return Err(Error::input(
            "cannot estimate a distribution from an empty sample",
        ));
    }
    let n = counts.n as f64;
    Ok(Distribution::empirical(
        counts.counts.iter().map(|&c| c as f64 / n).collect(),
        counts.n,
    ))
}

/// Labels attaining the maximum count.
pub fn winners(counts: &WinCounts) -> Vec<String> {
    counts
        .winner_indices()
        .into_iter()
        .map(|i| counts.labels[i].clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Finite,
    Asymptotic,
    /// Fixed externally supplied width (e.g. a calibrated oracle constant).
    Fixed,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite" => Ok(Method::Finite),
            "asymptotic" => Ok(Method::Asymptotic),
            other => Err(Error::input(format!(
                "unknown method '{other}' (expected finite|asymptotic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentOrder {
    #[default]
    Auto,
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetConfig {
    pub m: MomentOrder,
    /// Share of δ given to δ1; the rest goes to δ2.
    pub delta_split: f64,
    pub quantile: AsymptoticQuantile,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        SubsetConfig {
            m: MomentOrder::Auto,
            delta_split: 0.9,
            quantile: AsymptoticQuantile::Exact,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceSubset {
    pub members: Vec<String>,
    pub member_indices: Vec<usize>,
    /// Width D (or T = 2R for the finite scheme) used for membership.
    pub width: f64,
    pub method: Method,
    pub delta: f64,
    pub argmax_set: Vec<String>,
    /// The width reached p̂_[1], so every symbol is selected.
    pub saturated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<WidthResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub advisories: Vec<String>,
}

impl ConfidenceSubset {
    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.member_indices.binary_search(&i).is_ok()
    }
}

/// Indices u with p̂_u ≥ p̂_[1] - width (inclusive, with tolerance).
pub fn members_for_width(probs: &[f64], width: f64) -> Vec<usize> {
    let max = probs.iter().copied().fold(0.0, f64::max);
    let threshold = max - width - MEMBERSHIP_TOLERANCE;
    (0..probs.len())
        .filter(|&i| probs[i] >= threshold)
        .collect()
}

/// Same as [`members_for_width`] working on raw counts, avoiding the division.
pub fn member_count_for_width(counts: &[u64], n: u64, width: f64) -> (usize, u64) {
    let max = counts.iter().copied().max().unwrap_or(0);
    let threshold = (max as f64 / n as f64) - width - MEMBERSHIP_TOLERANCE;
    let nf = n as f64;
    let size = counts
        .iter()
        .filter(|&&c| c as f64 / nf >= threshold)
        .count();
    (size, max)
}

/// Subset construction prepared for one (n, δ, method, config) combination.
#[derive(Debug, Clone)]
pub struct SubsetSelector {
    n: u64,
    delta: f64,
    method: Method,
    config: SubsetConfig,
    finite: Option<DataDependentBound>,
    fixed_width: Option<f64>,
}

impl SubsetSelector {
    pub fn new(n: u64, delta: f64, method: Method, config: SubsetConfig) -> Result<Self> {
        check_probability("delta", delta)?;
        check_probability("delta_split", config.delta_split)?;
        if n == 0 {
            return Err(Error::input("cannot build a subset from an empty sample"));
        }
        let finite = match method {
            Method::Finite => {
                let delta_1 = config.delta_split * delta;
                let delta_2 = delta - delta_1;
                let m = match config.m {
                    MomentOrder::Auto => choose_m(delta_1)?,
                    MomentOrder::Fixed(m) => m,
                };
                Some(DataDependentBound::new(n, delta_1, delta_2, m)?)
            }
            Method::Asymptotic => None,
            Method::Fixed => {
                return Err(Error::domain("use SubsetSelector::fixed for a fixed width"))
            }
        };
        Ok(SubsetSelector {
            n,
            delta,
            method,
            config,
            finite,
            fixed_width: None,
        })
    }

    /// Selector that always uses the given width.
    pub fn fixed(n: u64, delta: f64, width: f64) -> Result<Self> {
        if width.is_nan() || width < 0.0 {
            return Err(Error::domain(format!(
                "width must be non-negative, got {width}"
            )));
        }
        Ok(SubsetSelector {
            n,
            delta,
            method: Method::Fixed,
            config: SubsetConfig::default(),
            finite: None,
            fixed_width: Some(width),
        })
    }

    pub fn finite_bound(&self) -> Option<&DataDependentBound> {
        self.finite.as_ref()
    }

    /// Membership width for the given empirical probabilities.
    pub fn width_for(&self, probs: &[f64]) -> Result<f64> {
        match self.method {
            Method::Finite => Ok(2.0 * self.finite.as_ref().expect("finite bound").radius(probs)),
            Method::Asymptotic => {
                let p1 = probs.iter().copied().fold(0.0, f64::max);
                Ok(asymptotic_width(p1, self.n, self.delta, self.config.quantile)?.width)
            }
            Method::Fixed => Ok(self.fixed_width.expect("fixed width")),
        }
    }

    pub fn select(&self, counts: &WinCounts) -> Result<ConfidenceSubset> {
        if counts.n != self.n {
            return Err(Error::input(format!(
                "selector prepared for n = {} but counts sum to {}",
                self.n, counts.n
            )));
        }
        let p_hat = mle(counts)?;
        let probs = p_hat.probs();
        let p1 = p_hat.max_prob();
        let (width, bound) = match self.method {
            Method::Finite => {
                let r = self.finite.as_ref().expect("finite bound").width(&p_hat);
                (2.0 * r.width, Some(r))
            }
            Method::Asymptotic => {
                let r = asymptotic_width(p1, self.n, self.delta, self.config.quantile)?;
                (r.width, Some(r))
            }
            Method::Fixed => (self.fixed_width.expect("fixed width"), None),
        };
        if !width.is_finite() {
            return Err(Error::numeric("width is not finite"));
        }
        let member_indices = members_for_width(probs, width);
        let mut advisories = Vec::new();
        if self.method == Method::Asymptotic {
            let sorted = p_hat.sorted_desc();
            let gap = sorted[0] - sorted.get(1).copied().unwrap_or(0.0);
            let doubt = counts.len() as f64 * (-(self.n as f64) * gap * gap).exp();
            if doubt > self.delta {
                advisories.push(format!(
                    "asymptotic regime doubtful: A*exp(-n*gap^2) = {doubt:.3} exceeds delta"
                ));
            }
        }
        Ok(ConfidenceSubset {
            members: member_indices
                .iter()
                .map(|&i| counts.labels[i].clone())
                .collect(),
            member_indices,
            width,
            method: self.method,
            delta: self.delta,
            argmax_set: winners(counts),
            saturated: width >= p1,
            bound,
            advisories,
        })
    }
}

/// One-shot subset construction.
pub fn select_subset(
    counts: &WinCounts,
    delta: f64,
    method: Method,
    config: SubsetConfig,
) -> Result<ConfidenceSubset> {
    SubsetSelector::new(counts.n, delta, method, config)?.select(counts)
}
