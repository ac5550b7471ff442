//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p best-subset --test acceptance`.

use std::process::Command;
use std::time::{Duration, Instant};

use best_subset::baselines::{nemenyi_cd, oracle_width, rank_verification};
use best_subset::bounds::{lower_bound_width, normal_quantile};
use best_subset::moments::{central_moment_poly, IntPoly, Parity};
use best_subset::rng::substream;
use best_subset::simulate::{
    coverage_experiment, uniform_simplex, zipf_distribution, ExperimentOptions, SimMethod,
};
use best_subset::{Distribution, WinCounts};
use num_bigint::BigInt;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget: Duration, detail: &mut String) -> bool {
    detail.push_str(&format!(
        "; {:.2}s of {}s budget",
        elapsed.as_secs_f64(),
        budget.as_secs()
    ));
    elapsed <= budget
}

/// Reference moment table as published: q^k coefficients as polynomials in n.
fn printed_table() -> Vec<(u32, Vec<IntPoly>)> {
    vec![
        (1, vec![]),
        (2, vec![IntPoly::from_coeffs(&[0, 1])]),
        (3, vec![IntPoly::from_coeffs(&[0, 1])]),
        (
            4,
            vec![
                IntPoly::from_coeffs(&[0, 1]),
                IntPoly::from_coeffs(&[0, -6, 3]),
            ],
        ),
        (
            5,
            vec![
                IntPoly::from_coeffs(&[0, 1]),
                IntPoly::from_coeffs(&[0, -20, 10]),
            ],
        ),
        (
            6,
            vec![
                IntPoly::from_coeffs(&[0, 1]),
                IntPoly::from_coeffs(&[-30, 15]),
                IntPoly::from_coeffs(&[150, -75, 15]),
            ],
        ),
    ]
}

fn c1_moment_table() -> Outcome {
    let start = Instant::now();
    let mut mismatched = Vec::new();
    for (m, expected) in printed_table() {
        let poly = central_moment_poly(m).unwrap();
        let parity_ok = poly.parity
            == if m % 2 == 0 {
                Parity::Even
            } else {
                Parity::Odd
            };
        let padded: Vec<IntPoly> = (0..expected.len().max(poly.coeffs.len()))
            .map(|i| expected.get(i).cloned().unwrap_or_else(IntPoly::zero))
            .collect();
        let got: Vec<IntPoly> = (0..padded.len())
            .map(|i| poly.coeffs.get(i).cloned().unwrap_or_else(IntPoly::zero))
            .collect();
        if !parity_ok || got != padded {
            mismatched.push(format!("m={m} computed {poly}"));
        }
    }
    let mut detail = if mismatched.is_empty() {
        "m = 1..6 match the printed table".to_string()
    } else {
        format!(
            "differs from the printed table at {}",
            mismatched.join("; ")
        )
    };
    let fast = within_budget(start.elapsed(), Duration::from_secs(1), &mut detail);
    outcome(mismatched.is_empty() && fast, detail)
}

fn pmf_moment(m: u32, n: u64, theta: f64) -> f64 {
    let mean = n as f64 * theta;
    let mut ln_binom = 0.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let ln_p = ln_binom + k as f64 * theta.ln() + (n - k) as f64 * (1.0 - theta).ln();
        total += ln_p.exp() * (k as f64 - mean).powi(m as i32);
    }
    total
}

fn c2_moment_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for m in (2..=10).step_by(2) {
        let poly = central_moment_poly(m).unwrap();
        for n in 1..=15u64 {
            for t in 1..=19 {
                let theta = f64::from(t) * 0.05;
                let direct = pmf_moment(m, n, theta);
                let rel = (poly.eval(n, theta) - direct).abs() / direct.abs();
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let mut detail = format!("{checked} cases, worst relative error {worst:.2e} (tolerance 1e-10)");
    let fast = within_budget(start.elapsed(), Duration::from_secs(10), &mut detail);
    outcome(worst <= 1e-10 && fast, detail)
}

fn c3_coefficient_bound() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut total = 0;
    let mut first = None;
    for m in (2..=12u32).step_by(2) {
        let poly = central_moment_poly(m).unwrap();
        for n in 1..=100u64 {
            for (i, c) in poly.coeffs.iter().enumerate() {
                let k = i + 1;
                let value = c.eval(n);
                let bound = num_traits::pow(BigInt::from(k), m as usize - k)
                    * num_traits::pow(BigInt::from(n), k);
                total += 1;
                if value > bound {
                    violations += 1;
                    first.get_or_insert_with(|| {
                        format!("first at m={m}, n={n}, k={k}: c = {value} > {bound}")
                    });
                }
            }
        }
    }
    let mut detail = format!("{violations} of {total} coefficients exceed k^(m-k) n^k");
    if let Some(f) = first {
        detail.push_str(&format!(" ({f})"));
    }
    let fast = within_budget(start.elapsed(), Duration::from_secs(5), &mut detail);
    outcome(violations == 0 && fast, detail)
}

const GRID: [u64; 3] = [50, 200, 1000];

fn c4_to_c6() -> (Outcome, Outcome, Outcome) {
    let start = Instant::now();
    let p = zipf_distribution(1.0, 20).unwrap();
    let report = coverage_experiment(
        &p,
        "zipf:s=1,A=20",
        &GRID,
        0.05,
        &[SimMethod::Finite, SimMethod::Asymptotic, SimMethod::Oracle],
        2000,
        20_240_601,
        &ExperimentOptions::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();

    let finite: Vec<_> = GRID
        .iter()
        .map(|&n| report.cell(SimMethod::Finite, n).unwrap())
        .collect();
    let oracle: Vec<_> = GRID
        .iter()
        .map(|&n| report.cell(SimMethod::Oracle, n).unwrap())
        .collect();
    let asym = report.cell(SimMethod::Asymptotic, 1000).unwrap();

    let c4_pass = finite.iter().all(|c| c.coverage >= 0.935);
    let mut d4 = finite
        .iter()
        .map(|c| format!("n={}: {:.4}", c.n, c.coverage))
        .collect::<Vec<_>>()
        .join(", ");
    d4.insert_str(0, "finite coverage ");
    d4.push_str(" (threshold 0.935)");
    let fast = within_budget(elapsed, Duration::from_secs(120), &mut d4);

    let c5 = outcome(
        asym.coverage >= 0.93,
        format!(
            "asymptotic coverage at n=1000: {:.4} (threshold 0.93)",
            asym.coverage
        ),
    );

    let dominated = finite
        .iter()
        .zip(&oracle)
        .all(|(f, o)| o.mean_size <= f.mean_size);
    let monotone = finite.windows(2).all(|w| w[1].mean_size <= w[0].mean_size);
    let sizes = finite
        .iter()
        .zip(&oracle)
        .map(|(f, o)| {
            format!(
                "n={}: oracle {:.3} vs finite {:.3}",
                f.n, o.mean_size, f.mean_size
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    let c6 = outcome(
        dominated && monotone,
        format!("{sizes}; finite non-increasing: {monotone}"),
    );
    (outcome(c4_pass && fast, d4), c5, c6)
}

fn near_tie(n: u64) -> Distribution {
    let a = 20;
    let p1 = 0.26;
    let p2 = 0.26 - 1.0 / n as f64;
    let rest = (1.0 - p1 - p2) / (a - 2) as f64;
    let mut probs = vec![p1, p2];
    probs.extend(std::iter::repeat_n(rest, a - 2));
    Distribution::new(probs).unwrap()
}

fn c7_lower_bound() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [100u64, 400] {
        let p = near_tie(n);
        let lower = lower_bound_width(&p, n, 0.05).unwrap().width;
        let oracle = oracle_width(&p, n, 0.05, 100_000, 7 + n).unwrap();
        pass &= lower <= oracle;
        parts.push(format!("n={n}: lower {lower:.4} <= oracle {oracle:.4}"));
    }
    let mut detail = parts.join(", ");
    let fast = within_budget(start.elapsed(), Duration::from_secs(60), &mut detail);
    outcome(pass && fast, detail)
}

fn c8_max_variance() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(8, 0, 0);
    let mut worst = 0.0f64;
    for draw in 0..10_000u64 {
        let a = rng.random_range(2..=50);
        let p = uniform_simplex(a, draw).unwrap();
        let max_var = p
            .probs()
            .iter()
            .map(|&x| x * (1.0 - x))
            .fold(f64::NEG_INFINITY, f64::max);
        let p1 = p.max_prob();
        worst = worst.max((max_var - p1 * (1.0 - p1)).abs());
    }
    let mut detail = format!("10000 draws, worst gap {worst:.2e} (tolerance 1e-12)");
    let fast = within_budget(start.elapsed(), Duration::from_secs(5), &mut detail);
    outcome(worst <= 1e-12 && fast, detail)
}

fn write_counts(dir: &std::path::Path) -> std::path::PathBuf {
    // Leading frequencies 30, 16, 9 of n = 117 over 36 algorithms.
    let counts = [
        30u64, 16, 9, 8, 7, 6, 5, 5, 4, 4, 3, 3, 3, 2, 2, 2, 2, 1, 1, 1, 1, 1, 1,
    ];
    let mut text = String::from("algorithm,count\n");
    for i in 0..36 {
        text.push_str(&format!(
            "alg{},{}\n",
            i + 1,
            counts.get(i).copied().unwrap_or(0)
        ));
    }
    let path = dir.join("counts.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn c9_case_study() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = write_counts(dir.path());
    let mut out = Vec::new();
    let mut err = Vec::new();
    let args = [
        "best-subset",
        "analyze",
        "--counts",
        path.to_str().unwrap(),
        "--delta",
        "0.05",
        "--method",
        "finite",
    ];
    let code = best_subset::cli::run(args, &mut out, &mut err);
    if code != 0 {
        return outcome(false, format!("analyze exited with {code}"));
    }
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let members: Vec<&str> = v["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap())
        .collect();
    let pass = members.len() <= 3 && members.contains(&"alg1");
    outcome(
        pass,
        format!(
            "subset size {} (need <= 3 and containing the top algorithm), width {:.4}, m = {}",
            members.len(),
            v["width"].as_f64().unwrap(),
            v["m_used"]
        ),
    )
}

fn c10_rank_verification() -> Outcome {
    let start = Instant::now();
    let delta = 0.05;
    let trials = 10_000u64;
    let n = 100u64;
    let mut rejections = 0u64;
    for t in 0..trials {
        let mut rng = substream(10, 0, t);
        let first = (0..n).filter(|_| rng.random_bool(0.5)).count() as u64;
        let counts = WinCounts::from_counts(vec![first, n - first]);
        let chain = rank_verification(&counts, delta).unwrap();
        rejections += u64::from(chain.comparisons[0].reject);
    }
    let rate = rejections as f64 / trials as f64;
    let limit = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    let mut detail = format!("false-rejection rate {rate:.4} (limit {limit:.4})");
    let fast = within_budget(start.elapsed(), Duration::from_secs(30), &mut detail);
    outcome(rate <= limit && fast, detail)
}

fn c11_nemenyi() -> Outcome {
    let mut worst = 0.0f64;
    for delta in [0.05, 0.10] {
        for n in [10usize, 100] {
            let cd = nemenyi_cd(2, n, delta).unwrap().cd;
            let expected = normal_quantile(delta / 2.0).unwrap() / (n as f64).sqrt();
            worst = worst.max((cd - expected).abs());
        }
    }
    outcome(
        worst <= 1e-3,
        format!("worst |cd - z/sqrt(n)| = {worst:.2e} (tolerance 1e-3)"),
    )
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: Option<&str>, tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_best-subset"));
        cmd.args([
            "simulate",
            "--dist",
            "zipf:s=1,A=20",
            "--n-grid",
            "50,200",
            "--reps",
            "300",
            "--methods",
            "finite,asymptotic,oracle",
            "--oracle-reps",
            "5000",
            "--delta",
            "0.05",
            "--seed",
            "12",
            "--plot-data",
        ])
        .arg(&csv);
        match threads {
            Some(t) => cmd.env("BEST_SUBSET_THREADS", t),
            None => cmd.env_remove("BEST_SUBSET_THREADS"),
        };
        let output = cmd.output().unwrap();
        assert!(
            output.status.success(),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
        (output.stdout, std::fs::read(csv).unwrap())
    };
    let reference = run(None, "default");
    let mut mismatches = Vec::new();
    for t in ["1", "2", "3", "8"] {
        if run(Some(t), t) != reference {
            mismatches.push(t);
        }
    }
    let simplex = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_best-subset"))
            .args([
                "simulate",
                "--dist",
                "simplex:A=20",
                "--n-grid",
                "100",
                "--reps",
                "200",
                "--methods",
                "finite",
                "--seed",
                "3",
            ])
            .env("BEST_SUBSET_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    let simplex_same = simplex("1") == simplex("4");
    outcome(
        mismatches.is_empty() && simplex_same,
        format!("JSON and CSV identical across thread counts 1, 2, 3, 8 and default: {}; simplex draw stable: {simplex_same}", mismatches.is_empty()),
    )
}

fn main() {
    let (c4, c5, c6) = c4_to_c6();
    let results = vec![
        (1, "moment table", c1_moment_table()),
        (2, "moment oracle equivalence", c2_moment_oracle()),
        (3, "coefficient bound", c3_coefficient_bound()),
        (4, "finite-sample coverage", c4),
        (5, "asymptotic coverage", c5),
        (6, "oracle dominance", c6),
        (7, "lower-bound consistency", c7_lower_bound()),
        (8, "max variance at the top symbol", c8_max_variance()),
        (9, "case-study reproduction", c9_case_study()),
        (10, "rank-verification calibration", c10_rank_verification()),
        (11, "Nemenyi two-algorithm reduction", c11_nemenyi()),
        (12, "determinism", c12_determinism()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
