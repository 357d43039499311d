//! Parametric bivariate extreme-value models on unit Fréchet margins.
//!
//! Each model gives the joint distribution `G(x, y)` and the conditional law
//! of the response `Y` given the covariate `X = x`, which is
//! `∂G/∂x` divided by the Fréchet density `x⁻² e^{-1/x}`. All three
//! conditional CDFs are evaluated in log space.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{check_covariates, check_positive, ConditionalLaw};
use crate::roots::invert_cdf;
use crate::special::{beta_cdf, normal_cdf, normal_log_cdf, normal_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EvModel {
    /// `G = exp{-(x^{-1/α} + y^{-1/α})^α}`, `α ∈ (0, 1]`; `α = 1` is independence.
    Logistic { alpha: f64 },
    /// Hüsler–Reiss with `λ > 0`; small `λ` means strong dependence.
    HuslerReiss { lambda: f64 },
    /// Coles–Tawn (Dirichlet) model with `α, β > 0`.
    ColesTawn { alpha: f64, beta: f64 },
}

/// One observation on unit Fréchet scale, covariate first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetPair {
    pub x: f64,
    pub y: f64,
}

impl FrechetPair {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        check_positive("x", x)?;
        check_positive("y", y)?;
        Ok(Self { x, y })
    }
}

impl EvModel {
    pub fn logistic(alpha: f64) -> Result<Self> {
        Self::Logistic { alpha }.validated()
    }

    pub fn husler_reiss(lambda: f64) -> Result<Self> {
        Self::HuslerReiss { lambda }.validated()
    }

    pub fn coles_tawn(alpha: f64, beta: f64) -> Result<Self> {
        Self::ColesTawn { alpha, beta }.validated()
    }

    /// The three simulation scenarios: strong (Hüsler–Reiss λ = 0.1), weak
    /// (Logistic α = 0.9) and asymmetric intermediate (Coles–Tawn 0.5, 100)
    /// dependence.
    pub fn scenario(n: u8) -> Result<Self> {
        match n {
            1 => Self::husler_reiss(0.1),
            2 => Self::logistic(0.9),
            3 => Self::coles_tawn(0.5, 100.0),
            _ => Err(Error::domain(format!("unknown scenario {n}, expected 1, 2 or 3"))),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            EvModel::Logistic { alpha } => alpha > 0.0 && alpha <= 1.0,
            EvModel::HuslerReiss { lambda } => lambda > 0.0 && lambda.is_finite(),
            EvModel::ColesTawn { alpha, beta } => {
                alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::domain(format!("invalid model parameters: {self}")))
        }
    }

    /// `G(x, y)`. Either argument may be `+inf`, which recovers a margin.
    pub fn joint_cdf(&self, x: f64, y: f64) -> Result<f64> {
        check_positive("x", x)?;
        check_positive("y", y)?;
        Ok(self.log_joint_cdf(x, y)?.exp())
    }

    fn log_joint_cdf(&self, x: f64, y: f64) -> Result<f64> {
        Ok(match *self {
            EvModel::Logistic { alpha: 1.0 } => -1.0 / x - 1.0 / y,
            EvModel::Logistic { alpha } => {
                let ln_s = log_add_exp(-x.ln() / alpha, -y.ln() / alpha);
                -(alpha * ln_s).exp()
            }
            EvModel::HuslerReiss { lambda } => {
                let (a, b) = hr_args(lambda, x, y);
                -normal_cdf(a) / x - div_or_zero(normal_cdf(b), y)
            }
            EvModel::ColesTawn { alpha, beta } => {
                let (q, q_c) = ct_weight(alpha, beta, x, y);
                let upper = beta_cdf(q_c, beta, alpha + 1.0)?;
                -upper / x - div_or_zero(beta_cdf(q, alpha, beta + 1.0)?, y)
            }
        })
    }

    /// `G_{Y|X}(y | x) = P(Y <= y | X = x)`.
    pub fn conditional_cdf(&self, y: f64, x: f64) -> Result<f64> {
        check_positive("y", y)?;
        check_positive("x", x)?;
        let ln = match *self {
            EvModel::Logistic { alpha: 1.0 } => -1.0 / y,
            EvModel::Logistic { alpha } => {
                // With t = (x/y)^{1/α} the x-powers cancel exactly:
                // ln G = -x⁻¹ ((1+t)^α - 1) + (α-1) ln(1+t).
                let ln_t = (x.ln() - y.ln()) / alpha;
                let l1p = ln_1p_exp(ln_t);
                -(alpha * l1p).exp_m1() / x + (alpha - 1.0) * l1p
            }
            EvModel::HuslerReiss { lambda } => {
                let (a, b) = hr_args(lambda, x, y);
                normal_log_cdf(a) + normal_sf(a) / x - div_or_zero(normal_cdf(b), y)
            }
            EvModel::ColesTawn { alpha, beta } => {
                let (q, q_c) = ct_weight(alpha, beta, x, y);
                let upper = beta_cdf(q_c, beta, alpha + 1.0)?;
                if upper <= 0.0 {
                    return Ok(0.0);
                }
                let lower = beta_cdf(q, alpha + 1.0, beta)?;
                upper.ln() + lower / x - div_or_zero(beta_cdf(q, alpha, beta + 1.0)?, y)
            }
        };
        Ok(ln.exp().clamp(0.0, 1.0))
    }
}

impl ConditionalLaw for EvModel {
    fn covariates(&self) -> usize {
        1
    }

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        check_covariates(1, x)?;
        EvModel::conditional_cdf(self, y, x[0])
    }

    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        check_covariates(1, x)?;
        match *self {
            EvModel::Logistic { alpha: 1.0 } => independence_quantile(q),
            EvModel::Logistic { alpha } => crate::manifold::logistic_quantile(alpha, q, x[0]),
            _ => crate::manifold::conditional_quantile(|y| EvModel::conditional_cdf(self, y, x[0]), q, x[0]),
        }
    }
}

impl fmt::Display for EvModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvModel::Logistic { alpha } => write!(f, "logistic:{alpha}"),
            EvModel::HuslerReiss { lambda } => write!(f, "husler-reiss:{lambda}"),
            EvModel::ColesTawn { alpha, beta } => write!(f, "coles-tawn:{alpha},{beta}"),
        }
    }
}

impl FromStr for EvModel {
    type Err = Error;

    /// `logistic:ALPHA`, `husler-reiss:LAMBDA` or `coles-tawn:ALPHA,BETA`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("model spec `{s}` should look like family:params")))?;
        let values = params
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::domain(format!("bad model parameter in `{s}`: {e}")))?;
        match (family.trim().to_ascii_lowercase().as_str(), values.as_slice()) {
            ("logistic", [a]) => Self::logistic(*a),
            ("husler-reiss" | "hr", [l]) => Self::husler_reiss(*l),
            ("coles-tawn" | "ct", [a, b]) => Self::coles_tawn(*a, *b),
            _ => Err(Error::domain(format!("unknown model spec `{s}`"))),
        }
    }
}

fn hr_args(lambda: f64, x: f64, y: f64) -> (f64, f64) {
    let r = (y.ln() - x.ln()) / (2.0 * lambda);
    (lambda + r, lambda - r)
}

// (q, 1 - q) with q = α y⁻¹ / (α y⁻¹ + β x⁻¹) = αx / (αx + βy), stable as y → ∞.
fn ct_weight(alpha: f64, beta: f64, x: f64, y: f64) -> (f64, f64) {
    if y.is_infinite() {
        return (0.0, 1.0);
    }
    let ax = alpha * x;
    let by = beta * y;
    let s = ax + by;
    (ax / s, by / s)
}

fn div_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// ln(1 + e^t)
fn ln_1p_exp(t: f64) -> f64 {
    if t > 35.0 {
        t + (-t).exp()
    } else {
        t.exp().ln_1p()
    }
}

/// Regression line under complete independence: `-1 / ln q`, constant in `x`.
pub fn independence_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must be in (0, 1), got {q}")));
    }
    Ok(-1.0 / q.ln())
}

/// Regression line under perfect dependence: `min(x₁, …, x_p)`, free of `q`.
pub fn perfect_dependence_quantile(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::domain("perfect dependence needs at least one covariate"));
    }
    for v in x {
        check_positive("covariate", *v)?;
    }
    Ok(x.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Soft-maximum approximation of the perfect-dependence conditional CDF,
/// `((e^{N/y} + Σ e^{N/x_i}) / Σ e^{N/x_i})^{-1/N - p}`, via log-sum-exp.
pub fn softmax_conditional_cdf(y: f64, x: &[f64], n: f64) -> Result<f64> {
    check_positive("y", y)?;
    check_positive("N", n)?;
    if x.is_empty() {
        return Err(Error::domain("softmax conditional CDF needs at least one covariate"));
    }
    for v in x {
        check_positive("covariate", *v)?;
    }
    let terms: Vec<f64> = x.iter().map(|xi| n / xi).collect();
    let lse = |it: &mut dyn Iterator<Item = f64>, max: f64| max + it.map(|t| (t - max).exp()).sum::<f64>().ln();
    let m_x = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let den = lse(&mut terms.iter().copied(), m_x);
    let m_all = m_x.max(n / y);
    let num = lse(&mut terms.iter().copied().chain(std::iter::once(n / y)), m_all);
    let exponent = -1.0 / n - x.len() as f64;
    Ok((exponent * (num - den)).exp())
}

/// `n` i.i.d. pairs from `model`: `X = -1/ln U` exactly, `Y` by numeric
/// inversion of the conditional CDF at the drawn `X`.
pub fn sample(model: &EvModel, n: usize, seed: u64) -> Result<Vec<FrechetPair>> {
    sample_law(&|y: f64, x: f64| model.conditional_cdf(y, x), n, seed)
}

/// [`sample`] for any bivariate conditional CDF `cdf(y, x)`.
pub fn sample_law<F>(cdf: &F, n: usize, seed: u64) -> Result<Vec<FrechetPair>>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = crate::seed::rng(seed);
    let uniforms: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            let v: f64 = rng.sample(Open01);
            (u, v)
        })
        .collect();
    uniforms
        .par_iter()
        .map(|&(u, v)| {
            let x = -1.0 / u.ln();
            let y = invert_cdf(|y| cdf(y, x), v, x, &[x])?;
            Ok(FrechetPair { x, y })
        })
        .collect()
}
