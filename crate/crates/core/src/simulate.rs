//! Distribution generators and the Monte Carlo coverage / subset-size harness.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::Serialize;

use crate::baselines::oracle_width_in_domain;
use crate::distribution::Distribution;
use crate::error::{check_probability, Error, Result};
use crate::exec::Execution;
use crate::numeric::compensated_sum;
use crate::rng::{cell_domain, domain, substream};
use crate::subset::{members_for_width, Method, SubsetConfig, SubsetSelector, WinCounts};
use crate::SCHEMA_VERSION;

/// Default number of replicates used to calibrate the oracle width.
pub const DEFAULT_ORACLE_REPS: u64 = 100_000;

/// p_u = u^{-s} / Σ_v v^{-s}, u = 1..=A.
pub fn zipf_distribution(s: f64, a: usize) -> Result<Distribution> {
    if a == 0 {
        return Err(Error::domain("alphabet size must be at least 1"));
    }
    if !s.is_finite() || s < 0.0 {
        return Err(Error::domain(format!(
            "zipf exponent must be non-negative, got {s}"
        )));
    }
    let weights: Vec<f64> = (1..=a).map(|u| (u as f64).powf(-s)).collect();
    let total = compensated_sum(weights.iter().copied());
    Distribution::new(weights.into_iter().map(|w| w / total).collect())
}

/// Flat Dirichlet draw: normalised unit-rate exponentials.
pub fn uniform_simplex(a: usize, seed: u64) -> Result<Distribution> {
    if a == 0 {
        return Err(Error::domain("alphabet size must be at least 1"));
    }
    let mut rng = substream(seed, domain::SIMPLEX, 0);
    let draws: Vec<f64> = (0..a).map(|_| Exp1.sample(&mut rng)).collect();
    let total = compensated_sum(draws.iter().copied());
    Distribution::new(draws.into_iter().map(|x| x / total).collect())
}

/// Inverse-CDF categorical sampler over a fixed symbol order.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(p: &Distribution) -> Self {
        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = crate::numeric::CompensatedSum::new();
        for &x in p.probs() {
            acc.add(x);
            cdf.push(acc.value());
        }
        // The last symbol with positive mass closes the CDF at exactly 1.
        if let Some(last) = p.probs().iter().rposition(|&x| x > 0.0) {
            for c in &mut cdf[last..] {
                *c = 1.0;
            }
        }
        CategoricalSampler { cdf }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub fn draw_counts(&self, rng: &mut ChaCha8Rng, n: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.cdf.len()];
        for _ in 0..n {
            counts[self.draw(rng)] += 1;
        }
        counts
    }
}

/// Multinomial(n, p) draw, deterministic in `seed`.
pub fn sample_counts(p: &Distribution, n: u64, seed: u64) -> WinCounts {
    let mut rng = substream(seed, domain::SAMPLE, 0);
    WinCounts::from_counts(CategoricalSampler::new(p).draw_counts(&mut rng, n))
}

/// Distribution descriptors: `zipf:s=1,A=20` or `simplex:A=20`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Zipf { s: f64, a: usize },
    Simplex { a: usize },
}

impl DistributionSpec {
    pub fn build(&self, seed: u64) -> Result<Distribution> {
        match *self {
            DistributionSpec::Zipf { s, a } => zipf_distribution(s, a),
            DistributionSpec::Simplex { a } => uniform_simplex(a, seed),
        }
    }
}

impl std::fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistributionSpec::Zipf { s, a } => write!(f, "zipf:s={s},A={a}"),
            DistributionSpec::Simplex { a } => write!(f, "simplex:A={a}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut s = None;
        let mut a = None;
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::input(format!("malformed distribution parameter '{part}'"))
            })?;
            match key.trim() {
                "s" => {
                    s = Some(value.trim().parse::<f64>().map_err(|_| {
                        Error::input(format!("zipf exponent '{value}' is not a number"))
                    })?)
                }
                "A" | "a" => {
                    a = Some(value.trim().parse::<usize>().map_err(|_| {
                        Error::input(format!("alphabet size '{value}' is not a positive integer"))
                    })?)
                }
                other => {
                    return Err(Error::input(format!(
                        "unknown distribution parameter '{other}'"
                    )))
                }
            }
        }
        let a = a.ok_or_else(|| Error::input("distribution descriptor needs A=<alphabet size>"))?;
        if a == 0 {
            return Err(Error::input("alphabet size must be at least 1"));
        }
        match kind.trim() {
            "zipf" => Ok(DistributionSpec::Zipf {
                s: s.unwrap_or(1.0),
                a,
            }),
            "simplex" => Ok(DistributionSpec::Simplex { a }),
            other => Err(Error::input(format!(
                "unknown distribution '{other}' (expected zipf|simplex)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Finite,
    Asymptotic,
    Oracle,
}

impl SimMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMethod::Finite => "finite",
            SimMethod::Asymptotic => "asymptotic",
            SimMethod::Oracle => "oracle",
        }
    }
}

impl FromStr for SimMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "finite" => Ok(SimMethod::Finite),
            "asymptotic" => Ok(SimMethod::Asymptotic),
            "oracle" => Ok(SimMethod::Oracle),
            other => Err(Error::input(format!(
                "unknown method '{other}' (expected finite|asymptotic|oracle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentOptions {
    pub config: SubsetConfig,
    pub oracle_reps: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            config: SubsetConfig::default(),
            oracle_reps: DEFAULT_ORACLE_REPS,
            execution: Execution::default(),
        }
    }
}

/// Aggregate for one (method, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCell {
    pub method: SimMethod,
    pub n: u64,
    pub reps: u64,
    pub covered: u64,
    pub coverage: f64,
    pub mean_size: f64,
    pub se_coverage: f64,
    pub se_size: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub descriptor: String,
    pub alphabet_size: usize,
    pub p_max: f64,
    pub leading: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DistributionSummary {
    pub fn new(descriptor: impl Into<String>, p: &Distribution) -> Self {
        let sorted = p.sorted_desc();
        DistributionSummary {
            descriptor: descriptor.into(),
            alphabet_size: p.len(),
            p_max: p.max_prob(),
            leading: sorted.into_iter().take(3).collect(),
            probs: p.probs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub seed: u64,
    pub delta: f64,
    pub reps: u64,
    pub oracle_reps: u64,
    pub config: SubsetConfig,
    pub distribution: DistributionSummary,
    pub cells: Vec<CoverageCell>,
}

impl CoverageReport {
    pub fn cell(&self, method: SimMethod, n: u64) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    /// Long-format CSV: `method,n,coverage,mean_size,se_coverage,se_size`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,n,coverage,mean_size,se_coverage,se_size\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.method.as_str(),
                c.n,
                c.coverage,
                c.mean_size,
                c.se_coverage,
                c.se_size
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Copy)]
struct ReplicateOutcome {
    covered: bool,
    size: usize,
    width: f64,
}

/// Monte Carlo coverage and expected subset size of each method over an n grid.
///
/// Within a replicate every method sees the same counts. Replicate `i` at grid
/// position `j` draws from its own stream, so the report does not depend on
/// the execution mode.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    p: &Distribution,
    descriptor: &str,
    n_grid: &[u64],
    delta: f64,
    methods: &[SimMethod],
    reps: u64,
    seed: u64,
    options: &ExperimentOptions,
) -> Result<CoverageReport> {
    check_probability("delta", delta)?;
    if reps == 0 {
        return Err(Error::input("reps must be at least 1"));
    }
    if methods.is_empty() {
        return Err(Error::input("at least one method is required"));
    }
    if n_grid.is_empty() {
        return Err(Error::input("n grid is empty"));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let truth = p.argmax_set();
    if methods.contains(&SimMethod::Oracle) && truth.len() != 1 {
        return Err(Error::input(
            "oracle requires a unique most probable symbol, but the distribution has tied maxima",
        ));
    }
    let sampler = CategoricalSampler::new(p);
    let mut cells = Vec::new();

    for (j, &n) in n_grid.iter().enumerate() {
        if n == 0 {
            return Err(Error::input("sample sizes in the n grid must be positive"));
        }
        let selectors: Vec<(SimMethod, SubsetSelector)> = methods
            .iter()
            .map(|&method| {
                let selector = match method {
                    SimMethod::Finite => {
                        SubsetSelector::new(n, delta, Method::Finite, options.config)?
                    }
                    SimMethod::Asymptotic => {
                        SubsetSelector::new(n, delta, Method::Asymptotic, options.config)?
                    }
                    SimMethod::Oracle => {
                        let w = oracle_width_in_domain(
                            p,
                            n,
                            delta,
                            options.oracle_reps,
                            seed,
                            cell_domain(domain::ORACLE, j as u64 + 1),
                            options.execution,
                        )?;
                        SubsetSelector::fixed(n, delta, w)?
                    }
                };
                Ok((method, selector))
            })
            .collect::<Result<_>>()?;

        let eval_domain = cell_domain(domain::EVALUATION, j as u64);
        let outcomes: Vec<Result<Vec<ReplicateOutcome>>> = options.execution.map(reps, |i| {
            let mut rng = substream(seed, eval_domain, i);
            let counts = sampler.draw_counts(&mut rng, n);
            let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            selectors
                .iter()
                .map(|(_, sel)| {
                    let width = sel.width_for(&probs)?;
                    let members = members_for_width(&probs, width);
                    let covered = truth.iter().all(|t| members.binary_search(t).is_ok());
                    Ok(ReplicateOutcome {
                        covered,
                        size: members.len(),
                        width,
                    })
                })
                .collect()
        });

        let mut covered = vec![0u64; selectors.len()];
        let mut size_sum = vec![0u64; selectors.len()];
        let mut size_sq = vec![0u128; selectors.len()];
        let mut widths = vec![crate::numeric::CompensatedSum::new(); selectors.len()];
        for rep in outcomes {
            for (k, o) in rep?.into_iter().enumerate() {
                covered[k] += u64::from(o.covered);
                size_sum[k] += o.size as u64;
                size_sq[k] += (o.size as u128) * (o.size as u128);
                widths[k].add(o.width);
            }
        }
        let r = reps as f64;
        for (k, (method, _)) in selectors.iter().enumerate() {
            let coverage = covered[k] as f64 / r;
            let mean_size = size_sum[k] as f64 / r;
            let var_size = if reps > 1 {
                ((size_sq[k] as f64 - r * mean_size * mean_size) / (r - 1.0)).max(0.0)
            } else {
                0.0
            };
            cells.push(CoverageCell {
                method: *method,
                n,
                reps,
                covered: covered[k],
                coverage,
                mean_size,
                se_coverage: (coverage * (1.0 - coverage) / r).sqrt(),
                se_size: (var_size / r).sqrt(),
                mean_width: widths[k].value() / r,
            });
        }
    }

    Ok(CoverageReport {
        schema_version: SCHEMA_VERSION,
        seed,
        delta,
        reps,
        oracle_reps: if methods.contains(&SimMethod::Oracle) {
            options.oracle_reps
        } else {
            0
        },
        config: options.config,
        distribution: DistributionSummary::new(descriptor, p),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_examples() {
        let z = zipf_distribution(1.0, 20).unwrap();
        let p = z.probs();
        assert!((p[0] - 0.278).abs() < 5e-4);
        assert!((p[1] - 0.139).abs() < 5e-4);
        assert!((p[2] - 0.093).abs() < 5e-4);
        assert_eq!(zipf_distribution(0.0, 4).unwrap().probs(), &[0.25; 4]);
        assert_eq!(zipf_distribution(2.5, 1).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(uniform_simplex(1, 3).unwrap().probs(), &[1.0]);
        assert_eq!(
            uniform_simplex(3, 9).unwrap(),
            uniform_simplex(3, 9).unwrap()
        );
        assert_ne!(
            uniform_simplex(3, 9).unwrap(),
            uniform_simplex(3, 10).unwrap()
        );
    }

    #[test]
    fn sampling_examples() {
        let p = Distribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(sample_counts(&p, 7, 1).counts(), &[7, 0]);
        assert_eq!(sample_counts(&p, 0, 1).counts(), &[0, 0]);
        let q = Distribution::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let c = sample_counts(&q, 1000, 4);
        assert_eq!(c.counts()[0] + c.counts()[2] + c.counts()[4], 0);
        assert_eq!(c.n(), 1000);
    }

    #[test]
    fn descriptor_parsing() {
        assert_eq!(
            "zipf:s=1,A=20".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::Zipf { s: 1.0, a: 20 }
        );
        assert_eq!(
            "simplex:A=5".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::Simplex { a: 5 }
        );
        assert!("zipf:s=1".parse::<DistributionSpec>().is_err());
        assert!("gauss:A=3".parse::<DistributionSpec>().is_err());
        assert_eq!(
            DistributionSpec::Zipf { s: 1.0, a: 20 }.to_string(),
            "zipf:s=1,A=20"
        );
    }

    #[test]
    fn point_mass_is_always_covered() {
        let p = Distribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        let opts = ExperimentOptions {
            oracle_reps: 1000,
            ..Default::default()
        };
        let methods = [SimMethod::Finite, SimMethod::Asymptotic, SimMethod::Oracle];
        let r = coverage_experiment(&p, "point", &[20, 50], 0.05, &methods, 50, 3, &opts).unwrap();
        assert_eq!(r.cells.len(), 6);
        for c in &r.cells {
            assert_eq!(c.coverage, 1.0);
            assert_eq!(c.mean_size, 1.0);
        }
    }

    #[test]
    fn oracle_rejects_tied_maxima() {
        let p = Distribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        let opts = ExperimentOptions {
            oracle_reps: 1000,
            ..Default::default()
        };
        let err = coverage_experiment(&p, "tie", &[50], 0.05, &[SimMethod::Oracle], 10, 1, &opts);
        assert!(matches!(err, Err(Error::Input(_))));
        // Finite copes with ties: both maxima must be covered.
        let ok = coverage_experiment(&p, "tie", &[50], 0.05, &[SimMethod::Finite], 10, 1, &opts)
            .unwrap();
        assert_eq!(ok.cells[0].coverage, 1.0);
    }

    #[test]
    fn csv_layout() {
        let p = zipf_distribution(1.0, 5).unwrap();
        let opts = ExperimentOptions::default();
        let r = coverage_experiment(
            &p,
            "zipf:s=1,A=5",
            &[30],
            0.1,
            &[SimMethod::Asymptotic],
            20,
            2,
            &opts,
        )
        .unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("method,n,coverage,mean_size,se_coverage,se_size")
        );
        assert!(lines.next().unwrap().starts_with("asymptotic,30,"));
    }
}
