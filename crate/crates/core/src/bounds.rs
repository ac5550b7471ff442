//! Confidence widths: asymptotic, data-independent moment bound, data-dependent
//! moment bound with McDiarmid correction, its leading-term simplification,
//! and the near-tie lower bound.
//!
//! The moment-based widths are evaluated in log domain; the inner sums of
//! `c_{k,m,n} (p(1-p))^k` reach 1e300 long before the widths stop being useful.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::distribution::Distribution;
use crate::error::{check_probability, Error, Result};
use crate::moments::{
    coefficients, curvature_term, sup_derivative, DerivativeSup, MomentCoefficients,
};
use crate::numeric::{log_domain_sum, LogValue};

pub use crate::numeric::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMethod {
    Asymptotic,
    DataIndependent,
    DataDependent,
    Simplified,
    LowerBound,
}

/// Which form of the lower bound produced the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundBranch {
    /// z_δ sqrt(2(p(1-p) - p²)/n)
    Primary,
    /// z_δ sqrt(p(1-p)/n), only reachable when p_[1] ≤ 1/3
    Secondary,
    /// Non-positive radicand; the bound says nothing.
    Vacuous,
}

/// Quantile used by the asymptotic width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticQuantile {
    /// Exact normal quantile z_{δ/2}.
    #[default]
    Exact,
    /// The large-deviation proxy sqrt(2 ln(2/δ)).
    LogApprox,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthResult {
    pub width: f64,
    pub method: WidthMethod,
    pub m_used: Option<u32>,
    pub delta_1: Option<f64>,
    pub delta_2: Option<f64>,
    pub epsilon_n: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    /// Set when the width exceeds 1, or the lower bound is vacuous.
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<LowerBoundBranch>,
}

impl WidthResult {
    fn new(width: f64, method: WidthMethod) -> Self {
        WidthResult {
            width,
            method,
            m_used: None,
            delta_1: None,
            delta_2: None,
            epsilon_n: None,
            diagnostics: BTreeMap::new(),
            vacuous: width > 1.0,
            branch: None,
        }
    }

    fn diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::domain("sample size must be positive"))
    } else {
        Ok(())
    }
}

fn check_unit(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// 2 z_{δ/2} sqrt(p̂_[1](1 - p̂_[1]) / n).
pub fn asymptotic_width(
    p_hat_max: f64,
    n: u64,
    delta: f64,
    quantile: AsymptoticQuantile,
) -> Result<WidthResult> {
    check_unit("p_hat_max", p_hat_max)?;
    check_n(n)?;
    check_probability("delta", delta)?;
    let z = match quantile {
        AsymptoticQuantile::Exact => normal_quantile(delta / 2.0)?,
        AsymptoticQuantile::LogApprox => (2.0 * (2.0 / delta).ln()).sqrt(),
    };
    let width = 2.0 * z * (p_hat_max * (1.0 - p_hat_max) / n as f64).sqrt();
    Ok(WidthResult::new(width, WidthMethod::Asymptotic).diag("z", z))
}

/// Σ_u Σ_k c_k (p_u(1-p_u))^k in log form.
pub fn moment_sum(coeffs: &MomentCoefficients, probs: &[f64]) -> LogValue {
    let mut terms = Vec::with_capacity(probs.len() * coeffs.half_order());
    for &p in probs {
        let x = p * (1.0 - p);
        if x <= 0.0 {
            continue;
        }
        let lx = x.ln();
        for (i, c) in coeffs.logs.iter().enumerate() {
            let k = (i + 1) as f64;
            terms.push(*c * LogValue::positive(k * lx));
        }
    }
    log_domain_sum(&terms)
}

/// (Σ_u (p_u(1-p_u))^{m/2})^{1/m}, the soft maximum of sqrt(p_u(1-p_u)).
pub fn moment_norm(probs: &[f64], m: u32) -> f64 {
    let d = f64::from(m / 2);
    let terms: Vec<LogValue> = probs
        .iter()
        .map(|&p| p * (1.0 - p))
        .filter(|&x| x > 0.0)
        .map(|x| LogValue::positive(d * x.ln()))
        .collect();
    let s = log_domain_sum(&terms);
    if s.sign <= 0 {
        0.0
    } else {
        (s.ln_abs / f64::from(m)).exp()
    }
}

fn root_width(ln_prefactor: f64, inner: LogValue, ln_delta: f64, m: u32) -> f64 {
    if inner.sign <= 0 {
        return 0.0;
    }
    (ln_prefactor + (inner.ln_abs - ln_delta) / f64::from(m)).exp()
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

/// (1/n) δ^{-1/m} (Σ_k c_{k,m,n} Σ_u p_u^k (1-p_u)^k)^{1/m}.
pub fn data_independent_width(p: &Distribution, n: u64, delta: f64, m: u32) -> Result<WidthResult> {
    check_even(m)?;
    check_n(n)?;
    check_probability("delta", delta)?;
    let coeffs = coefficients(m, n)?;
    let sum = moment_sum(&coeffs, p.probs());
    let width = root_width(-(n as f64).ln(), sum, delta.ln(), m);
    let mut r =
        WidthResult::new(width, WidthMethod::DataIndependent).diag("ln_moment_sum", sum.ln_abs);
    r.m_used = Some(m);
    r.delta_1 = Some(delta);
    Ok(r)
}

/// Data-dependent bound R_{δ1,δ2,m} prepared for a fixed (n, δ1, δ2, m).
///
/// Everything except the empirical moment sum depends only on these four
/// values, so simulations build one of these per sample size and reuse it.
#[derive(Debug, Clone)]
pub struct DataDependentBound {
    n: u64,
    m: u32,
    delta_1: f64,
    delta_2: f64,
    coeffs: MomentCoefficients,
    sup: DerivativeSup,
    curvature: LogValue,
    epsilon: LogValue,
}

impl DataDependentBound {
    pub fn new(n: u64, delta_1: f64, delta_2: f64, m: u32) -> Result<Self> {
        check_even(m)?;
        check_probability("delta_1", delta_1)?;
        check_probability("delta_2", delta_2)?;
        if n < 2 {
            return Err(Error::domain(
                "the data-dependent bound needs n ≥ 2 (sqrt(n/(n-1)) is undefined at n = 1)",
            ));
        }
        let coeffs = coefficients(m, n)?;
        let sup = sup_derivative(&coeffs);
        let curvature = curvature_term(&coeffs);
        let bracket = log_domain_sum(&[sup.log, curvature]);
        if bracket.sign < 0 {
            return Err(Error::numeric("McDiarmid bracket evaluated negative"));
        }
        let ln_scale = 0.5 * ((2.0 / n as f64) * (1.0 / delta_2).ln()).ln();
        let epsilon = bracket * LogValue::positive(ln_scale);
        Ok(DataDependentBound {
            n,
            m,
            delta_1,
            delta_2,
            coeffs,
            sup,
            curvature,
            epsilon,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn coefficients(&self) -> &MomentCoefficients {
        &self.coeffs
    }

    /// The McDiarmid correction ε_n.
    pub fn epsilon_n(&self) -> f64 {
        self.epsilon.to_f64()
    }

    /// Width R only, skipping diagnostics (hot path for simulations).
    pub fn radius(&self, probs: &[f64]) -> f64 {
        let sum = moment_sum(&self.coeffs, probs);
        let inner = log_domain_sum(&[sum, self.epsilon]);
        let n = self.n as f64;
        let ln_prefactor = -n.ln() + 0.5 * (n / (n - 1.0)).ln();
        root_width(ln_prefactor, inner, self.delta_1.ln(), self.m)
    }

    pub fn width(&self, p_hat: &Distribution) -> WidthResult {
        let sum = moment_sum(&self.coeffs, p_hat.probs());
        let n = self.n as f64;
        let mut r = WidthResult::new(self.radius(p_hat.probs()), WidthMethod::DataDependent)
            .diag("moment_sum", sum.to_f64())
            .diag("ln_moment_sum", sum.ln_abs)
            .diag("sqrt_n_over_n_minus_1", (n / (n - 1.0)).sqrt())
            .diag("sup_derivative", self.sup.value)
            .diag("sup_derivative_argmax", self.sup.argmax)
            .diag("curvature_term", self.curvature.to_f64());
        r.m_used = Some(self.m);
        r.delta_1 = Some(self.delta_1);
        r.delta_2 = Some(self.delta_2);
        r.epsilon_n = Some(self.epsilon_n());
        r
    }
}

pub fn data_dependent_width(
    p_hat: &Distribution,
    n: u64,
    delta_1: f64,
    delta_2: f64,
    m: u32,
) -> Result<WidthResult> {
    Ok(DataDependentBound::new(n, delta_1, delta_2, m)?.width(p_hat))
}

/// Even integer nearest to 2 ln(1/δ1), at least 2, ties rounded up.
pub fn choose_m(delta_1: f64) -> Result<u32> {
    check_probability("delta_1", delta_1)?;
    let target = 2.0 * (1.0 / delta_1).ln();
    let half = (target / 2.0 + 0.5).floor();
    Ok((2.0 * half).max(2.0) as u32)
}

/// Leading term (1/n) (c_{d,m,n}/δ1)^{1/m} (Σ_u (p̂_u(1-p̂_u))^{m/2})^{1/m}.
pub fn simplified_width(p_hat: &Distribution, n: u64, delta_1: f64, m: u32) -> Result<WidthResult> {
    check_even(m)?;
    check_n(n)?;
    check_probability("delta_1", delta_1)?;
    let coeffs = coefficients(m, n)?;
    let lead = coeffs.leading_log();
    let norm = moment_norm(p_hat.probs(), m);
    let width = if norm == 0.0 || lead.sign <= 0 {
        0.0
    } else {
        let factor = (-(n as f64).ln() + (lead.ln_abs - delta_1.ln()) / f64::from(m)).exp();
        factor * norm
    };
    let mut r = WidthResult::new(width, WidthMethod::Simplified)
        .diag("ln_leading_coefficient", lead.ln_abs)
        .diag("moment_norm", norm);
    r.m_used = Some(m);
    r.delta_1 = Some(delta_1);
    Ok(r)
}

/// Leading-order lower bound for near-tied top probabilities; O(1/n) terms
/// are dropped.
pub fn lower_bound_width(p: &Distribution, n: u64, delta: f64) -> Result<WidthResult> {
    check_n(n)?;
    check_probability("delta", delta)?;
    let z = normal_quantile(delta)?;
    let p1 = p.max_prob();
    let nf = n as f64;
    let radicand = 2.0 * (p1 * (1.0 - p1) - p1 * p1);
    let secondary = z * (p1 * (1.0 - p1) / nf).sqrt();

    let (width, branch) = if radicand <= 0.0 {
        (0.0, LowerBoundBranch::Vacuous)
    } else {
        let primary = z * (radicand / nf).sqrt();
        if p1 <= 1.0 / 3.0 && secondary > primary {
            (secondary, LowerBoundBranch::Secondary)
        } else {
            (primary, LowerBoundBranch::Primary)
        }
    };
    let mut r = WidthResult::new(width, WidthMethod::LowerBound)
        .diag("z", z)
        .diag("radicand", radicand)
        .diag("secondary", secondary)
        .diag("p_max", p1);
    r.vacuous = branch == LowerBoundBranch::Vacuous;
    r.branch = Some(branch);
    Ok(r)
}

/// Per-m data-dependent widths. Diagnostic only: picking the minimum over
/// m after seeing the data would void the coverage guarantee.
pub fn m_scan(
    p_hat: &Distribution,
    n: u64,
    delta_1: f64,
    delta_2: f64,
    orders: &[u32],
) -> Result<Vec<(u32, f64)>> {
    orders
        .iter()
        .map(|&m| {
            Ok((
                m,
                DataDependentBound::new(n, delta_1, delta_2, m)?.radius(p_hat.probs()),
            ))
        })
        .collect()
}
