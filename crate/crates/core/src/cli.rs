//! Command-line front end. Reports go to stdout as JSON, diagnostics and a
//! short human summary go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_traits::Signed;
use serde::Serialize;

use crate::baselines::{
    friedman_test, nemenyi_test, rank_verification, FriedmanResult, NemenyiComparison,
    VerificationChain,
};
use crate::bounds::m_scan;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::{
    parse_counts_csv, parse_scores_csv, ranks_from_scores, wins_from_scores, Direction, TieAudit,
    TiePolicy,
};
use crate::moments::{central_moment_poly, coefficients, eval_central_moment, sup_derivative};
use crate::simulate::{
    coverage_experiment, DistributionSpec, ExperimentOptions, SimMethod, DEFAULT_ORACLE_REPS,
};
use crate::subset::{mle, Method, MomentOrder, SubsetConfig, SubsetSelector, WinCounts};
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "best-subset",
    version,
    about = "Confidence subsets for the most frequent winner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a confidence subset from win counts or a score matrix.
    Analyze(AnalyzeArgs),
    /// Monte Carlo coverage and subset size on a synthetic distribution.
    Simulate(SimulateArgs),
    /// Friedman, Nemenyi and rank-verification baselines.
    Baselines(BaselinesArgs),
    /// Central-moment coefficients of Bin(n, θ).
    Moments(MomentsArgs),
}

#[derive(Debug, Args)]
struct ScoreInput {
    /// Score matrix CSV: `dataset,<alg1>,<alg2>,...`.
    #[arg(long, requires = "direction")]
    scores: Option<PathBuf>,
    /// higher_better or lower_better.
    #[arg(long, value_parser = parse_direction)]
    direction: Option<Direction>,
    /// random, first or all_fractional_rounded.
    #[arg(long, default_value = "random", value_parser = parse_tie_policy)]
    tie_policy: TiePolicy,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Win counts CSV: `algorithm,count`.
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    counts: Option<PathBuf>,
    #[command(flatten)]
    input: ScoreInput,
    #[arg(long, default_value_t = 0.05, value_parser = parse_open_unit)]
    delta: f64,
    /// finite or asymptotic.
    #[arg(long, default_value = "finite", value_parser = parse_method)]
    method: Method,
    /// Moment order: `auto` or an even integer.
    #[arg(long, default_value = "auto", value_parser = parse_moment_order)]
    m: MomentOrder,
    /// Fraction of δ assigned to the moment term.
    #[arg(long, default_value_t = 0.9, value_parser = parse_open_unit)]
    delta_split: f64,
    /// Also report the finite-scheme radius for m = 2, 4, ..., 16.
    #[arg(long)]
    m_scan: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `zipf:s=1,A=20` or `simplex:A=20`.
    #[arg(long, value_parser = parse_dist)]
    dist: DistributionSpec,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,200,1000")]
    n_grid: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    /// Comma-separated subset of finite, asymptotic, oracle.
    #[arg(long, value_delimiter = ',', default_value = "finite,asymptotic,oracle", value_parser = parse_sim_method)]
    methods: Vec<SimMethod>,
    #[arg(long, default_value_t = 0.05, value_parser = parse_open_unit)]
    delta: f64,
    #[arg(long, default_value = "auto", value_parser = parse_moment_order)]
    m: MomentOrder,
    #[arg(long, default_value_t = 0.9, value_parser = parse_open_unit)]
    delta_split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_REPS)]
    oracle_reps: u64,
    /// Write the long-format CSV used for plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BaselinesArgs {
    #[arg(long)]
    counts: Option<PathBuf>,
    #[command(flatten)]
    input: ScoreInput,
    #[arg(long, default_value_t = 0.05, value_parser = parse_open_unit)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[arg(long)]
    m: u32,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_open_unit(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie strictly between 0 and 1"))
    }
}

fn parse_moment_order(s: &str) -> std::result::Result<MomentOrder, String> {
    if s == "auto" {
        return Ok(MomentOrder::Auto);
    }
    match s.parse::<u32>() {
        Ok(m) if m >= 2 && m % 2 == 0 => Ok(MomentOrder::Fixed(m)),
        _ => Err(format!("'{s}' is neither 'auto' nor an even integer >= 2")),
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sim_method(s: &str) -> std::result::Result<SimMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tie_policy(s: &str) -> std::result::Result<TiePolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dist(s: &str) -> std::result::Result<DistributionSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Format with six significant digits.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..=6).contains(&magnitude) {
        let decimals = (5 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}

fn subset_config(m: MomentOrder, delta_split: f64) -> SubsetConfig {
    SubsetConfig {
        m,
        delta_split,
        ..SubsetConfig::default()
    }
}

fn load_scores(input: &ScoreInput) -> Result<Option<crate::ingest::ScoreMatrix>> {
    match (&input.scores, input.direction) {
        (Some(path), Some(direction)) => Ok(Some(parse_scores_csv(path, direction)?)),
        (Some(_), None) => Err(Error::input("--scores requires --direction")),
        (None, _) => Ok(None),
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema_version: u32,
    seed: u64,
    labels: Vec<String>,
    counts: Vec<u64>,
    n: u64,
    p_hat: Vec<f64>,
    method: Method,
    delta: f64,
    delta_1: Option<f64>,
    delta_2: Option<f64>,
    m_used: Option<u32>,
    width: f64,
    members: Vec<String>,
    argmax_set: Vec<String>,
    vacuous: bool,
    saturated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_n: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    advisories: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tie_audit: Option<TieAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_scan: Option<Vec<MScanEntry>>,
}

#[derive(Serialize)]
struct MScanEntry {
    m: u32,
    radius: f64,
    width: f64,
}

fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (counts, tie_audit, dropped_rows) = match (&args.counts, load_scores(&args.input)?) {
        (Some(path), _) => (parse_counts_csv(path)?, None, None),
        (None, Some(scores)) => {
            let (wins, audit) = wins_from_scores(&scores, args.input.tie_policy, args.seed)?;
            (wins, Some(audit), Some(scores.dropped_rows))
        }
        (None, None) => return Err(Error::input("either --counts or --scores is required")),
    };
    if counts.n() < 2 {
        return Err(Error::input("at least two recorded wins are needed"));
    }
    let config = subset_config(args.m, args.delta_split);
    let selector = SubsetSelector::new(counts.n(), args.delta, args.method, config)?;
    let subset = selector.select(&counts)?;
    let p_hat = mle(&counts)?;

    let bound = subset.bound.as_ref();
    let (delta_1, delta_2) = match args.method {
        Method::Finite => (
            Some(args.delta * args.delta_split),
            Some(args.delta * (1.0 - args.delta_split)),
        ),
        _ => (None, None),
    };
    let m_scan_entries = if args.m_scan {
        let (d1, d2) = (
            args.delta * args.delta_split,
            args.delta * (1.0 - args.delta_split),
        );
        let orders: Vec<u32> = (1..=8).map(|k| 2 * k).collect();
        Some(
            m_scan(&p_hat, counts.n(), d1, d2, &orders)?
                .into_iter()
                .map(|(m, radius)| MScanEntry {
                    m,
                    radius,
                    width: 2.0 * radius,
                })
                .collect(),
        )
    } else {
        None
    };

    let report = AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        labels: counts.labels().to_vec(),
        counts: counts.counts().to_vec(),
        n: counts.n(),
        p_hat: p_hat.probs().to_vec(),
        method: args.method,
        delta: args.delta,
        delta_1,
        delta_2,
        m_used: bound.and_then(|b| b.m_used),
        width: subset.width,
        members: subset.members.clone(),
        argmax_set: subset.argmax_set.clone(),
        vacuous: subset.width > 1.0,
        saturated: subset.saturated,
        epsilon_n: bound.and_then(|b| b.epsilon_n),
        advisories: subset.advisories.clone(),
        tie_audit,
        dropped_rows,
        m_scan: m_scan_entries,
    };
    let text = to_json(&report);
    if let Some(path) = &args.json {
        write_file(path, &text)?;
    }
    out.write_all(text.as_bytes())?;

    writeln!(
        err,
        "n = {}, method = {:?}, width = {}, subset size {} of {}",
        counts.n(),
        args.method,
        sig6(subset.width),
        subset.len(),
        counts.len()
    )?;
    for &i in &subset.member_indices {
        writeln!(
            err,
            "  {:<24} p_hat = {}",
            counts.labels()[i],
            sig6(p_hat.probs()[i])
        )?;
    }
    for a in &subset.advisories {
        writeln!(err, "advisory: {a}")?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let p = args.dist.build(args.seed)?;
    if args.methods.contains(&SimMethod::Oracle) && p.unique_argmax().is_none() {
        return Err(Error::input(format!(
            "oracle requested but {} has tied maxima at {}",
            args.dist,
            sig6(p.max_prob())
        )));
    }
    let options = ExperimentOptions {
        config: subset_config(args.m, args.delta_split),
        oracle_reps: args.oracle_reps,
        execution: Execution::from_env(),
    };
    let report = coverage_experiment(
        &p,
        &args.dist.to_string(),
        &args.n_grid,
        args.delta,
        &args.methods,
        args.reps,
        args.seed,
        &options,
    )?;
    let text = report.to_json() + "\n";
    if let Some(path) = &args.plot_data {
        write_file(path, &report.to_csv())?;
    }
    if let Some(path) = &args.json {
        write_file(path, &text)?;
    }
    out.write_all(text.as_bytes())?;

    let d = &report.distribution;
    let leading: Vec<String> = d.leading.iter().map(|&x| sig6(x)).collect();
    writeln!(
        err,
        "{}: A = {}, p_1 = {}, leading [{}]",
        d.descriptor,
        d.alphabet_size,
        sig6(d.p_max),
        leading.join(", ")
    )?;
    for c in &report.cells {
        writeln!(
            err,
            "  {:<10} n = {:<6} coverage = {} (se {}), mean size = {}",
            c.method.as_str(),
            c.n,
            sig6(c.coverage),
            sig6(c.se_coverage),
            sig6(c.mean_size)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselinesReport {
    schema_version: u32,
    seed: u64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    average_ranks: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    friedman: Option<FriedmanResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nemenyi: Option<NemenyiComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<VerificationChain>,
}

fn cmd_baselines(args: &BaselinesArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let scores = load_scores(&args.input)?;
    if scores.is_none() && args.counts.is_none() {
        return Err(Error::input("baselines needs --scores and/or --counts"));
    }
    let mut report = BaselinesReport {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        delta: args.delta,
        average_ranks: None,
        friedman: None,
        nemenyi: None,
        verification: None,
    };
    if let Some(scores) = &scores {
        let ranks = ranks_from_scores(scores)?;
        let friedman = friedman_test(&ranks, args.delta)?;
        let nemenyi = nemenyi_test(&ranks, args.delta)?;
        writeln!(
            err,
            "Friedman chi2 = {}, p = {}; Iman F = {}, p = {}; Nemenyi CD = {}",
            sig6(friedman.chi2_f),
            sig6(friedman.p_value),
            sig6(friedman.iman_f),
            sig6(friedman.iman_p),
            sig6(nemenyi.cd)
        )?;
        report.average_ranks = Some(
            ranks
                .labels
                .iter()
                .cloned()
                .zip(ranks.average_ranks.iter().copied())
                .collect(),
        );
        report.friedman = Some(friedman);
        report.nemenyi = Some(nemenyi);
    }
    if let Some(path) = &args.counts {
        let counts: WinCounts = parse_counts_csv(path)?;
        let chain = rank_verification(&counts, args.delta)?;
        writeln!(
            err,
            "rank verification: verified prefix length {}",
            chain.verified_prefix_length
        )?;
        report.verification = Some(chain);
    }
    out.write_all(to_json(&report).as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct CoefficientCheck {
    k: usize,
    coefficient: String,
    value: f64,
    nonnegative: bool,
    /// c_k ≤ k^{m-k} n^k
    within_power_bound: bool,
}

#[derive(Serialize)]
struct MomentsReport {
    schema_version: u32,
    seed: u64,
    m: u32,
    n: u64,
    polynomial: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficient_checks: Option<Vec<CoefficientCheck>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_derivative: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_derivative_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

fn cmd_moments(args: &MomentsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if args.m == 0 {
        return Err(Error::input("--m must be positive"));
    }
    if args.n == 0 {
        return Err(Error::input("--n must be positive"));
    }
    let poly = central_moment_poly(args.m)?;
    let mut report = MomentsReport {
        schema_version: SCHEMA_VERSION,
        seed: args.seed,
        m: args.m,
        n: args.n,
        polynomial: poly.to_string(),
        coefficients: None,
        coefficient_checks: None,
        sup_derivative: None,
        sup_derivative_at: None,
        theta: args.theta,
        value: None,
    };
    if args.m.is_multiple_of(2) {
        let coeffs = coefficients(args.m, args.n)?;
        let checks = coeffs
            .exact
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = i + 1;
                let bound = num_traits::pow(BigInt::from(k), args.m as usize - k)
                    * num_traits::pow(BigInt::from(args.n), k);
                CoefficientCheck {
                    k,
                    coefficient: c.to_string(),
                    value: coeffs.values[i],
                    nonnegative: !c.is_negative(),
                    within_power_bound: *c <= bound,
                }
            })
            .collect();
        let sup = sup_derivative(&coeffs);
        report.coefficients = Some(coeffs.values.clone());
        report.coefficient_checks = Some(checks);
        report.sup_derivative = Some(sup.value);
        report.sup_derivative_at = Some(sup.argmax);
    } else if args.theta.is_none() {
        return Err(Error::input(format!(
            "coefficients are defined for even m only; pass --theta to evaluate the order-{} moment",
            args.m
        )));
    }
    if let Some(theta) = args.theta {
        let value = eval_central_moment(args.m, args.n, theta)?;
        writeln!(
            err,
            "E[(X - n theta)^{}] = {} at n = {}, theta = {}",
            args.m,
            sig6(value),
            args.n,
            sig6(theta)
        )?;
        report.value = Some(value);
    }
    out.write_all(to_json(&report).as_bytes())?;
    Ok(())
}

/// Parse `args` (including the program name) and run the selected command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Baselines(a) => cmd_baselines(a, out, err),
        Command::Moments(a) => cmd_moments(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("best-subset").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn moment_examples() {
        let (code, out, _) = call(&["moments", "--m", "4", "--n", "10"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["coefficients"], serde_json::json!([10.0, 240.0]));
        assert_eq!(v["schema_version"], 1);

        let (code, out, _) = call(&["moments", "--m", "2", "--n", "10", "--theta", "0.5"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["value"].as_f64().unwrap() - 2.5).abs() < 1e-12);

        assert_eq!(call(&["moments", "--m", "3", "--n", "10"]).0, 2);
        assert_eq!(
            call(&["moments", "--m", "3", "--n", "10", "--theta", "0.3"]).0,
            0
        );
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(
            call(&["analyze", "--counts", "x.csv", "--delta", "1.5"]).0,
            2
        );
        assert_eq!(call(&["analyze", "--counts", "x.csv", "--m", "3"]).0, 2);
        assert_eq!(call(&["analyze", "--counts", "/nonexistent/file.csv"]).0, 2);
        assert_eq!(call(&["baselines"]).0, 2);
        assert_eq!(call(&["simulate", "--dist", "gauss:A=3"]).0, 2);
        assert_eq!(call(&[]).0, 2);
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.2780153), "0.278015");
        assert_eq!(sig6(12.3456789), "12.3457");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(1.234567e-7), "1.23457e-7");
        assert_eq!(sig6(0.0), "0");
    }
}
