//! Procedures the confidence-subset scheme is compared against: Friedman and
//! Iman–Davenport tests on average ranks, the Nemenyi critical difference,
//! top-down rank verification on win counts, and the Monte Carlo oracle width.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};
use statrs::function::beta::beta_reg;

use crate::distribution::Distribution;
use crate::error::{check_probability, Error, Result};
use crate::exec::Execution;
use crate::numeric::{compensated_sum, normal_cdf, normal_pdf};
use crate::rng::{cell_domain, domain, substream};
use crate::simulate::CategoricalSampler;
use crate::subset::WinCounts;

/// Per-dataset ranks (1 = best, midranks for ties) and their column means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankMatrix {
    pub labels: Vec<String>,
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
    /// Rows containing at least one midrank tie. No tie correction is applied
    /// to the Friedman statistic.
    pub tied_rows: usize,
}

impl RankMatrix {
    pub fn new(labels: Vec<String>, ranks: Vec<Vec<f64>>) -> Result<Self> {
        let a = labels.len();
        if a == 0 {
            return Err(Error::input("rank matrix needs at least one algorithm"));
        }
        let expected = (a * (a + 1)) as f64 / 2.0;
        let mut tied_rows = 0;
        for (i, row) in ranks.iter().enumerate() {
            if row.len() != a {
                return Err(Error::input(format!(
                    "rank row {i} has {} entries, expected {a}",
                    row.len()
                )));
            }
            if row.iter().any(|&r| !(1.0..=a as f64).contains(&r)) {
                return Err(Error::input(format!(
                    "rank row {i} has entries outside [1, {a}]"
                )));
            }
            if (row.iter().sum::<f64>() - expected).abs() > 1e-9 {
                return Err(Error::input(format!(
                    "rank row {i} does not sum to A(A+1)/2"
                )));
            }
            if row.iter().any(|r| r.fract() != 0.0) {
                tied_rows += 1;
            }
        }
        let n = ranks.len().max(1) as f64;
        let average_ranks = (0..a)
            .map(|j| compensated_sum(ranks.iter().map(|row| row[j])) / n)
            .collect();
        Ok(RankMatrix {
            labels,
            ranks,
            average_ranks,
            tied_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    pub fn a(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FriedmanResult {
    pub chi2_f: f64,
    pub df: usize,
    pub p_value: f64,
    pub iman_f: f64,
    pub iman_df: (usize, usize),
    pub iman_p: f64,
    pub reject: bool,
    pub iman_reject: bool,
}

pub fn friedman_test(ranks: &RankMatrix, delta: f64) -> Result<FriedmanResult> {
    check_probability("delta", delta)?;
    let (n, a) = (ranks.n(), ranks.a());
    if n < 2 || a < 2 {
        return Err(Error::input(format!(
            "Friedman test needs n ≥ 2 and A ≥ 2, got n = {n}, A = {a}"
        )));
    }
    let (nf, af) = (n as f64, a as f64);
    let sum_sq = compensated_sum(ranks.average_ranks.iter().map(|r| r * r));
    let chi2_f =
        (12.0 * nf / (af * (af + 1.0)) * (sum_sq - af * (af + 1.0).powi(2) / 4.0)).max(0.0);
    let df = a - 1;
    let p_value = ChiSquared::new(df as f64)
        .map_err(|e| Error::numeric(e.to_string()))?
        .sf(chi2_f);
    let iman_df = (a - 1, (a - 1) * (n - 1));
    let denom = nf * (af - 1.0) - chi2_f;
    let (iman_f, iman_p) = if denom <= 1e-12 * nf * af {
        (f64::INFINITY, 0.0)
    } else {
        let f = (nf - 1.0) * chi2_f / denom;
        let dist = FisherSnedecor::new(iman_df.0 as f64, iman_df.1 as f64)
            .map_err(|e| Error::numeric(e.to_string()))?;
        (f, dist.sf(f))
    };
    Ok(FriedmanResult {
        chi2_f,
        df,
        p_value,
        iman_f,
        iman_df,
        iman_p,
        reject: p_value <= delta,
        iman_reject: iman_p <= delta,
    })
}

const RANGE_U_LIMIT: f64 = 9.0;
const RANGE_STEPS: usize = 3600;

/// P(range of `a` i.i.d. standard normals ≤ w) = a ∫ φ(u) [Φ(u+w) - Φ(u)]^{a-1} du.
pub fn studentized_range_cdf(w: f64, a: usize) -> f64 {
    if w <= 0.0 || a < 2 {
        return if a < 2 { 1.0 } else { 0.0 };
    }
    let h = 2.0 * RANGE_U_LIMIT / RANGE_STEPS as f64;
    let f = |u: f64| {
        normal_pdf(u)
            * (normal_cdf(u + w) - normal_cdf(u))
                .max(0.0)
                .powi(a as i32 - 1)
    };
    // Composite Simpson.
    let mut acc = crate::numeric::CompensatedSum::new();
    acc.add(f(-RANGE_U_LIMIT));
    acc.add(f(RANGE_U_LIMIT));
    for i in 1..RANGE_STEPS {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(weight * f(-RANGE_U_LIMIT + i as f64 * h));
    }
    (a as f64 * acc.value() * h / 3.0).clamp(0.0, 1.0)
}

/// Upper-δ quantile of the range of `a` standard normals (infinite degrees of
/// freedom), by bisection on [`studentized_range_cdf`].
pub fn studentized_range_quantile(a: usize, delta: f64) -> Result<f64> {
    check_probability("delta", delta)?;
    if a < 2 {
        return Err(Error::domain("studentized range needs at least two groups"));
    }
    let target = 1.0 - delta;
    let (mut lo, mut hi) = (0.0, 4.0);
    while studentized_range_cdf(hi, a) < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::numeric("studentized range quantile did not bracket"));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, a) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct NemenyiCd {
    pub cd: f64,
    pub q_over_sqrt2: f64,
}

/// CD = (q_δ / √2) · sqrt(A(A+1) / (6n)).
pub fn nemenyi_cd(a: usize, n: usize, delta: f64) -> Result<NemenyiCd> {
    if n == 0 {
        return Err(Error::domain("Nemenyi needs at least one dataset"));
    }
    let q_over_sqrt2 = studentized_range_quantile(a, delta)? / std::f64::consts::SQRT_2;
    let af = a as f64;
    let cd = q_over_sqrt2 * (af * (af + 1.0) / (6.0 * n as f64)).sqrt();
    Ok(NemenyiCd { cd, q_over_sqrt2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDecision {
    pub first: String,
    pub second: String,
    pub rank_difference: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NemenyiComparison {
    pub cd: f64,
    pub q_over_sqrt2: f64,
    pub best: String,
    /// Algorithms whose average rank is within `cd` of the best (best included).
    pub not_significantly_worse: Vec<String>,
    pub pairs: Vec<PairDecision>,
}

pub fn nemenyi_test(ranks: &RankMatrix, delta: f64) -> Result<NemenyiComparison> {
    let NemenyiCd { cd, q_over_sqrt2 } = nemenyi_cd(ranks.a(), ranks.n(), delta)?;
    let avg = &ranks.average_ranks;
    let best = (0..avg.len())
        .min_by(|&i, &j| avg[i].total_cmp(&avg[j]))
        .expect("non-empty");
    let not_significantly_worse = (0..avg.len())
        .filter(|&j| avg[j] - avg[best] < cd)
        .map(|j| ranks.labels[j].clone())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..avg.len() {
        for j in i + 1..avg.len() {
            let diff = (avg[i] - avg[j]).abs();
            pairs.push(PairDecision {
                first: ranks.labels[i].clone(),
                second: ranks.labels[j].clone(),
                rank_difference: diff,
                significant: diff >= cd,
            });
        }
    }
    Ok(NemenyiComparison {
        cd,
        q_over_sqrt2,
        best: ranks.labels[best].clone(),
        not_significantly_worse,
        pairs,
    })
}

/// P(Bin(trials, 1/2) ≥ successes).
pub fn binomial_half_upper_tail(trials: u64, successes: u64) -> f64 {
    if successes == 0 {
        1.0
    } else if successes > trials {
        0.0
    } else {
        beta_reg(successes as f64, (trials - successes + 1) as f64, 0.5)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankComparison {
    pub upper: String,
    pub lower: String,
    pub upper_count: u64,
    pub lower_count: u64,
    /// Selection-adjusted p-value, min(1, 2 · one-sided tail).
    pub p_value: f64,
    /// P(Bin(N_upper + N_lower, 1/2) ≥ N_upper).
    pub one_sided_p: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationChain {
    pub delta: f64,
    pub comparisons: Vec<RankComparison>,
    /// Number of leading consecutive rejections.
    pub verified_prefix_length: usize,
}

/// Top-down rank verification on sorted win counts.
///
/// Consecutive pairs are compared with the conditional binomial test given
/// their combined count. Because the pair is chosen by its observed order,
/// the valid p-value is twice the one-sided tail.
pub fn rank_verification(counts: &WinCounts, delta: f64) -> Result<VerificationChain> {
    check_probability("delta", delta)?;
    if counts.len() < 2 {
        return Err(Error::input(
            "rank verification needs at least two algorithms",
        ));
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&i, &j| counts.counts()[j].cmp(&counts.counts()[i]).then(i.cmp(&j)));
    let mut comparisons = Vec::new();
    let mut verified = 0;
    for w in order.windows(2) {
        let (hi, lo) = (counts.counts()[w[0]], counts.counts()[w[1]]);
        let one_sided = binomial_half_upper_tail(hi + lo, hi);
        let p_value = (2.0 * one_sided).min(1.0);
        let reject = p_value <= delta;
        comparisons.push(RankComparison {
            upper: counts.labels()[w[0]].clone(),
            lower: counts.labels()[w[1]].clone(),
            upper_count: hi,
            lower_count: lo,
            p_value,
            one_sided_p: one_sided,
            reject,
        });
        if !reject {
            break;
        }
        verified += 1;
    }
    Ok(VerificationChain {
        delta,
        comparisons,
        verified_prefix_length: verified,
    })
}

/// Minimum replicate count accepted by [`oracle_width`].
pub const MIN_ORACLE_REPS: u64 = 1000;

/// Monte Carlo estimate of the smallest T with P(p̂_[1] - p̂_s ≤ T) ≥ 1 - δ for
/// a known most probable symbol s. Returns the ⌈(1-δ)·reps⌉-th order
/// statistic, so the calibration sample itself is covered at ≥ 1 - δ.
pub fn oracle_width(p: &Distribution, n: u64, delta: f64, reps: u64, seed: u64) -> Result<f64> {
    oracle_width_in_domain(
        p,
        n,
        delta,
        reps,
        seed,
        cell_domain(domain::ORACLE, 0),
        Execution::default(),
    )
}

pub fn oracle_width_with(
    p: &Distribution,
    n: u64,
    delta: f64,
    reps: u64,
    seed: u64,
    execution: Execution,
) -> Result<f64> {
    oracle_width_in_domain(
        p,
        n,
        delta,
        reps,
        seed,
        cell_domain(domain::ORACLE, 0),
        execution,
    )
}

pub(crate) fn oracle_width_in_domain(
    p: &Distribution,
    n: u64,
    delta: f64,
    reps: u64,
    seed: u64,
    stream_domain: u64,
    execution: Execution,
) -> Result<f64> {
    check_probability("delta", delta)?;
    if reps < MIN_ORACLE_REPS {
        return Err(Error::domain(format!(
            "oracle calibration needs at least {MIN_ORACLE_REPS} replicates"
        )));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let s = p
        .unique_argmax()
        .ok_or_else(|| Error::input("oracle requires a unique most probable symbol"))?;
    let sampler = CategoricalSampler::new(p);
    let mut gaps: Vec<u64> = execution.map(reps, |i| {
        let mut rng = substream(seed, stream_domain, i);
        let counts = sampler.draw_counts(&mut rng, n);
        counts.iter().copied().max().unwrap_or(0) - counts[s]
    });
    let excluded = (delta * reps as f64).floor() as u64;
    let k = (reps - excluded).clamp(1, reps) as usize;
    let (_, kth, _) = gaps.select_nth_unstable(k - 1);
    Ok(*kth as f64 / n as f64)
}
