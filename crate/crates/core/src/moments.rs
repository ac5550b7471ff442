//! Binomial central moments as exact polynomials in q = θ(1-θ).
//!
//! For Y ~ Bin(n, θ) the m-th central moment is `Σ_k c_k q^k` when m is even
//! and `(1-2θ) Σ_k c_k q^k` when m is odd, where each `c_k` is an integer
//! polynomial in n. The coefficients are generated by the recurrence
//! `μ_{m+1} = q (n m μ_{m-1} + dμ_m/dθ)` carried out directly in that basis,
//! using `d(q^k)/dθ = k q^{k-1} (1-2θ)` and `(1-2θ)^2 = 1 - 4q`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{bigint_log, log_domain_sum, LogValue};

/// Integer polynomial in the sample size n, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntPoly(Vec<BigInt>);

impl IntPoly {
    pub fn zero() -> Self {
        IntPoly(Vec::new())
    }

    pub fn constant(c: i64) -> Self {
        IntPoly(vec![BigInt::from(c)]).normalized()
    }

    /// Build from ascending coefficients `[a0, a1, ...]` meaning `a0 + a1 n + ...`.
    pub fn from_coeffs(coeffs: &[i64]) -> Self {
        IntPoly(coeffs.iter().map(|&c| BigInt::from(c)).collect()).normalized()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn normalized(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    fn add(&self, other: &IntPoly) -> IntPoly {
        let len = self.0.len().max(other.0.len());
        let out = (0..len)
            .map(|i| {
                let a = self.0.get(i).cloned().unwrap_or_default();
                let b = other.0.get(i).cloned().unwrap_or_default();
                a + b
            })
            .collect();
        IntPoly(out).normalized()
    }

    fn scale(&self, factor: i64) -> IntPoly {
        let f = BigInt::from(factor);
        IntPoly(self.0.iter().map(|c| c * &f).collect()).normalized()
    }

    fn times_n(&self) -> IntPoly {
        if self.is_zero() {
            return IntPoly::zero();
        }
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(BigInt::zero());
        out.extend(self.0.iter().cloned());
        IntPoly(out)
    }

    /// Exact value at a given n (Horner).
    pub fn eval(&self, n: u64) -> BigInt {
        let n = BigInt::from(n);
        self.0
            .iter()
            .rev()
            .fold(BigInt::zero(), |acc, c| acc * &n + c)
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (power, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let magnitude = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            first = false;
            let show_coeff = power == 0 || !magnitude.is_one();
            if show_coeff {
                write!(f, "{magnitude}")?;
            }
            match power {
                0 => {}
                1 => write!(f, "n")?,
                p => write!(f, "n^{p}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Exact m-th binomial central moment in the q-basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentPolynomial {
    pub order: u32,
    pub parity: Parity,
    /// `coeffs[k - 1]` is c_{k,m,·} for k = 1..=⌊m/2⌋.
    pub coeffs: Vec<IntPoly>,
}

// Internal form: coefficients indexed from k = 0.
#[derive(Clone)]
struct QForm {
    parity: Parity,
    terms: Vec<IntPoly>,
}

impl QForm {
    fn get(&self, k: usize) -> IntPoly {
        self.terms.get(k).cloned().unwrap_or_default()
    }

    fn derivative(&self) -> QForm {
        match self.parity {
            // d/dθ Σ a_k q^k = (1-2θ) Σ k a_k q^{k-1}
            Parity::Even => QForm {
                parity: Parity::Odd,
                terms: (1..self.terms.len())
                    .map(|k| self.terms[k].scale(k as i64))
                    .collect(),
            },
            // d/dθ (1-2θ) Σ b_k q^k = -2 Σ b_k q^k + (1-4q) Σ k b_k q^{k-1}
            //                       = Σ_k [-(4k+2) b_k + (k+1) b_{k+1}] q^k
            Parity::Odd => QForm {
                parity: Parity::Even,
                terms: (0..self.terms.len())
                    .map(|k| {
                        let kk = k as i64;
                        self.get(k)
                            .scale(-(4 * kk + 2))
                            .add(&self.get(k + 1).scale(kk + 1))
                    })
                    .collect(),
            },
        }
    }

    fn add(&self, other: &QForm) -> QForm {
        debug_assert_eq!(self.parity, other.parity);
        let len = self.terms.len().max(other.terms.len());
        QForm {
            parity: self.parity,
            terms: (0..len).map(|k| self.get(k).add(&other.get(k))).collect(),
        }
    }

    fn times_n_scaled(&self, factor: i64) -> QForm {
        QForm {
            parity: self.parity,
            terms: self
                .terms
                .iter()
                .map(|t| t.times_n().scale(factor))
                .collect(),
        }
    }

    fn times_q(&self) -> QForm {
        let mut terms = Vec::with_capacity(self.terms.len() + 1);
        terms.push(IntPoly::zero());
        terms.extend(self.terms.iter().cloned());
        QForm {
            parity: self.parity,
            terms,
        }
    }
}

/// Exact moment polynomial of order `m` (m ≥ 1).
pub fn central_moment_poly(m: u32) -> Result<MomentPolynomial> {
    if m == 0 {
        return Err(Error::domain("moment order must be at least 1"));
    }
    let mut prev = QForm {
        parity: Parity::Even,
        terms: vec![IntPoly::constant(1)],
    };
    let mut cur = QForm {
        parity: Parity::Odd,
        terms: Vec::new(),
    };
    for j in 1..m {
        let next = prev
            .times_n_scaled(j as i64)
            .add(&cur.derivative())
            .times_q();
        prev = cur;
        cur = next;
    }
    let top = (m / 2) as usize;
    let coeffs = (1..=top).map(|k| cur.get(k)).collect();
    let parity = if m.is_multiple_of(2) {
        Parity::Even
    } else {
        Parity::Odd
    };
    Ok(MomentPolynomial {
        order: m,
        parity,
        coeffs,
    })
}

impl MomentPolynomial {
    /// Exact coefficients c_{k,m,n} at a concrete n.
    pub fn instantiate(&self, n: u64) -> Vec<BigInt> {
        self.coeffs.iter().map(|c| c.eval(n)).collect()
    }

    /// Evaluate E(Y - nθ)^m for Y ~ Bin(n, θ).
    pub fn eval(&self, n: u64, theta: f64) -> f64 {
        let q = theta * (1.0 - theta);
        let lq = LogValue::from_f64(q);
        let terms: Vec<LogValue> = self
            .instantiate(n)
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = (i + 1) as f64;
                let power = if lq.sign == 0 {
                    LogValue::ZERO
                } else {
                    LogValue::positive(k * lq.ln_abs)
                };
                bigint_log(c) * power
            })
            .collect();
        let sum = log_domain_sum(&terms).to_f64();
        match self.parity {
            Parity::Even => sum,
            Parity::Odd => (1.0 - 2.0 * theta) * sum,
        }
    }
}

impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let k = i + 1;
            let q = if k == 1 {
                "q".to_string()
            } else {
                format!("q^{k}")
            };
            parts.push(format!("({c})*{q}"));
        }
        let body = if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        };
        match self.parity {
            Parity::Even => write!(f, "{body}"),
            Parity::Odd if parts.is_empty() => write!(f, "0"),
            Parity::Odd => write!(f, "(1-2θ)*({body})"),
        }
    }
}

/// Numeric coefficients c_{k,m,n}, k = 1..=m/2, for an even order.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCoefficients {
    pub m: u32,
    pub n: u64,
    /// Floating-point values (may be infinite for astronomically large n·m).
    pub values: Vec<f64>,
    #[serde(skip)]
    pub logs: Vec<LogValue>,
    #[serde(skip)]
    pub exact: Vec<BigInt>,
}

impl MomentCoefficients {
    pub fn half_order(&self) -> usize {
        self.values.len()
    }

    /// Leading coefficient c_{m/2,m,n} in log form.
    pub fn leading_log(&self) -> LogValue {
        *self
            .logs
            .last()
            .expect("even order has at least one coefficient")
    }
}

fn check_even(m: u32) -> Result<()> {
    if m == 0 || m % 2 == 1 {
        Err(Error::domain(format!(
            "moment order must be an even positive integer, got {m}"
        )))
    } else {
        Ok(())
    }
}

pub fn coefficients(m: u32, n: u64) -> Result<MomentCoefficients> {
    check_even(m)?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let exact = central_moment_poly(m)?.instantiate(n);
    let logs: Vec<LogValue> = exact.iter().map(bigint_log).collect();
    let values = exact
        .iter()
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(MomentCoefficients {
        m,
        n,
        values,
        logs,
        exact,
    })
}

pub fn eval_central_moment(m: u32, n: u64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    Ok(central_moment_poly(m)?.eval(n, theta))
}

const SUP_GRID_POINTS: usize = 4097;
const GOLDEN_MAX_ITERS: usize = 200;

/// Supremum over p ∈ [0, 1] of f'(p) = Σ_k c_k k (p(1-p))^{k-1} (1-2p).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeSup {
    pub value: f64,
    pub argmax: f64,
    #[serde(skip)]
    pub log: LogValue,
}

/// Scaled derivative: returns f'(p) / scale where ln(scale) is supplied.
struct ScaledDerivative {
    weights: Vec<f64>,
}

impl ScaledDerivative {
    fn new(coeffs: &MomentCoefficients, ln_scale: f64) -> Self {
        let weights = coeffs
            .logs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = (i + 1) as f64;
                let w = *c * LogValue::positive(k.ln());
                match w.sign {
                    0 => 0.0,
                    s => f64::from(s) * (w.ln_abs - ln_scale).exp(),
                }
            })
            .collect();
        ScaledDerivative { weights }
    }

    fn eval(&self, p: f64) -> f64 {
        let x = p * (1.0 - p);
        let poly = self.weights.iter().rev().fold(0.0, |acc, w| acc * x + w);
        poly * (1.0 - 2.0 * p)
    }
}

pub fn sup_derivative(coeffs: &MomentCoefficients) -> DerivativeSup {
    let ln_scale = coeffs
        .logs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.sign != 0)
        .map(|(i, c)| c.ln_abs + ((i + 1) as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let f = ScaledDerivative::new(coeffs, ln_scale);

    let step = 1.0 / (SUP_GRID_POINTS - 1) as f64;
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    for i in 0..SUP_GRID_POINTS {
        let v = f.eval(i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut argmax = best_i as f64 * step;

    // Golden-section refinement inside the neighbouring grid cells.
    let mut a = (best_i.saturating_sub(1)) as f64 * step;
    let mut b = ((best_i + 1).min(SUP_GRID_POINTS - 1)) as f64 * step;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f.eval(c), f.eval(d));
    for _ in 0..GOLDEN_MAX_ITERS {
        if b - a < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f.eval(d);
        }
    }
    let mid = 0.5 * (a + b);
    let refined = f.eval(mid);
    if refined > best {
        best = refined;
        argmax = mid;
    }
    let log = LogValue::from_f64(best) * LogValue::positive(ln_scale);
    DerivativeSup {
        value: log.to_f64(),
        argmax,
        log,
    }
}

/// sup_{p∈[0,1]} Σ_k c_{k,m,n} k (p(1-p))^{k-1} (1-2p) for even m.
pub fn sup_derivative_term(m: u32, n: u64) -> Result<f64> {
    Ok(sup_derivative(&coefficients(m, n)?).value)
}

/// Σ_k c_{k,m,n} k(k-1) / (n 2^{2k-3}), the curvature part of the McDiarmid
/// correction, in log form.
pub fn curvature_term(coeffs: &MomentCoefficients) -> LogValue {
    let ln_n = (coeffs.n as f64).ln();
    let terms: Vec<LogValue> = coeffs
        .logs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| {
            let k = (i + 1) as f64;
            let ln_factor = (k * (k - 1.0)).ln() - ln_n - (2.0 * k - 3.0) * std::f64::consts::LN_2;
            *c * LogValue::positive(ln_factor)
        })
        .collect();
    log_domain_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeff_at(poly: &MomentPolynomial, k: usize, n: u64) -> i64 {
        poly.coeffs[k - 1].eval(n).to_i64().unwrap()
    }

    /// Direct Σ_y C(n,y) θ^y (1-θ)^{n-y} (y - nθ)^m.
    fn pmf_moment(m: u32, n: u64, theta: f64) -> f64 {
        let mut acc = 0.0;
        let mut binom = 1.0f64;
        for y in 0..=n {
            if y > 0 {
                binom *= (n - y + 1) as f64 / y as f64;
            }
            let w = binom * theta.powi(y as i32) * (1.0 - theta).powi((n - y) as i32);
            acc += w * (y as f64 - n as f64 * theta).powi(m as i32);
        }
        acc
    }

    #[test]
    fn low_orders() {
        assert!(central_moment_poly(1).unwrap().coeffs.is_empty());
        let m2 = central_moment_poly(2).unwrap();
        assert_eq!(m2.coeffs, vec![IntPoly::from_coeffs(&[0, 1])]);
        let m3 = central_moment_poly(3).unwrap();
        assert_eq!(m3.parity, Parity::Odd);
        assert_eq!(m3.coeffs, vec![IntPoly::from_coeffs(&[0, 1])]);
        let m4 = central_moment_poly(4).unwrap();
        assert_eq!(m4.coeffs[0], IntPoly::from_coeffs(&[0, 1]));
        assert_eq!(m4.coeffs[1], IntPoly::from_coeffs(&[0, -6, 3]));
    }

    #[test]
    fn orders_five_and_six_match_pmf_derived_values() {
        // Values fixed from the pmf oracle (fitted exactly at several n).
        let m5 = central_moment_poly(5).unwrap();
        assert_eq!(m5.coeffs[1], IntPoly::from_coeffs(&[0, -12, 10]));
        let m6 = central_moment_poly(6).unwrap();
        assert_eq!(m6.coeffs[0], IntPoly::from_coeffs(&[0, 1]));
        assert_eq!(m6.coeffs[1], IntPoly::from_coeffs(&[0, -30, 25]));
        assert_eq!(m6.coeffs[2], IntPoly::from_coeffs(&[0, 120, -130, 15]));
        for n in 1..8u64 {
            for &t in &[0.1, 0.3, 0.7] {
                let oracle = pmf_moment(6, n, t);
                assert!((m6.eval(n, t) - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_order_is_rejected() {
        assert!(matches!(central_moment_poly(0), Err(Error::Domain(_))));
    }

    #[test]
    fn numeric_coefficients() {
        assert_eq!(coefficients(4, 10).unwrap().values, vec![10.0, 240.0]);
        assert_eq!(coefficients(2, 7).unwrap().values, vec![7.0]);
        assert!(coefficients(3, 7).is_err());
        assert!(coefficients(4, 0).is_err());
    }

    #[test]
    fn eight_order_at_five_matches_oracle() {
        let poly = central_moment_poly(8).unwrap();
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let oracle = pmf_moment(8, 5, t);
            assert!((poly.eval(5, t) - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
        }
        assert_eq!(coeff_at(&poly, 1, 5), 5);
    }

    #[test]
    fn evaluation_examples() {
        assert!((eval_central_moment(2, 10, 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!((eval_central_moment(4, 10, 0.5).unwrap() - 17.5).abs() < 1e-12);
        assert!((pmf_moment(4, 10, 0.5) - 17.5).abs() < 1e-9);
        assert!(eval_central_moment(3, 6, 0.5).unwrap().abs() < 1e-12);
        assert!(eval_central_moment(3, 6, 1.5).is_err());
    }

    #[test]
    fn odd_orders_are_antisymmetric_even_symmetric() {
        for m in 1..=9u32 {
            let poly = central_moment_poly(m).unwrap();
            for &t in &[0.1, 0.25, 0.4] {
                let a = poly.eval(9, t);
                let b = poly.eval(9, 1.0 - t);
                let tol = 1e-9 * a.abs().max(1.0);
                if m % 2 == 0 {
                    assert!((a - b).abs() <= tol);
                } else {
                    assert!((a + b).abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn sup_derivative_for_order_two_is_n() {
        for n in [1u64, 5, 100] {
            let s = sup_derivative_term(2, n).unwrap();
            assert!((s - n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn sup_derivative_matches_dense_grid() {
        // f'(p) = 10(1-2p) + 480 p(1-p)(1-2p) for m = 4, n = 10.
        let f = |p: f64| 10.0 * (1.0 - 2.0 * p) + 480.0 * p * (1.0 - p) * (1.0 - 2.0 * p);
        let grid = (0..=1_000_000)
            .map(|i| f(i as f64 / 1e6))
            .fold(f64::NEG_INFINITY, f64::max);
        let s = sup_derivative_term(4, 10).unwrap();
        assert!(((s - grid) / grid).abs() < 1e-9, "{s} vs {grid}");
        assert!(s >= grid);
    }

    #[test]
    fn sup_derivative_lower_bounded_by_endpoint() {
        for &(m, n) in &[(6u32, 8u64), (8, 3), (10, 50), (20, 1000)] {
            let s = sup_derivative_term(m, n).unwrap();
            assert!(s >= n as f64 * (1.0 - 1e-12), "m={m} n={n}");
        }
    }

    #[test]
    fn display_is_readable() {
        let m4 = central_moment_poly(4).unwrap();
        assert_eq!(m4.to_string(), "(3n^2 - 6n)*q^2 + (n)*q");
        assert_eq!(central_moment_poly(1).unwrap().to_string(), "0");
    }
}
