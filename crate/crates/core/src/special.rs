//! Scalar special functions used by the model formulas.
//!
//! Everything here is pure and works on `f64`. Domain violations are reported
//! as [`Error::Domain`] rather than NaN.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// Stopping rule shared by the iterative evaluations in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTolerance {
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for ScalarTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_iter: 100,
        }
    }
}

impl ScalarTolerance {
    pub fn new(abs_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || max_iter == 0 {
            return Err(Error::domain(format!(
                "tolerance needs abs_tol > 0 and max_iter >= 1, got {abs_tol}, {max_iter}"
            )));
        }
        Ok(Self { abs_tol, max_iter })
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Principal branch of the Lambert W function on `[-1/e, inf)`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    lambert_w0_with(z, &ScalarTolerance::default())
}

/// [`lambert_w0`] with an explicit stopping rule.
///
/// Halley iteration on `w e^w - z`, started from `ln(1 + z)` for `z >= 0`
/// and from the branch-point series for `-1/e <= z < 0`.
pub fn lambert_w0_with(z: f64, tol: &ScalarTolerance) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if z.is_nan() || z < branch {
        return Err(Error::domain(format!("lambert_w0 needs z >= -1/e, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = if z >= 0.0 {
        z.ln_1p()
    } else {
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        if p < 1e-8 {
            return Ok(-1.0 + p);
        }
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    };
    for _ in 0..tol.max_iter {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return Ok(w);
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= f64::EPSILON * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    let residual = (w * w.exp() - z).abs();
    if residual <= tol.abs_tol * z.abs().max(1.0) {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            what: "lambert_w0",
            iterations: tol.max_iter,
        })
    }
}

/// `W(exp(log_z))` without forming `exp(log_z)`, for arguments that would overflow.
pub fn lambert_w0_exp(log_z: f64) -> Result<f64> {
    if log_z.is_nan() {
        return Err(Error::domain("lambert_w0_exp of NaN"));
    }
    if log_z < 500.0 {
        return lambert_w0(log_z.exp());
    }
    // w + ln w = log_z
    let mut w = log_z - log_z.ln();
    for _ in 0..100 {
        let step = (w + w.ln() - log_z) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= f64::EPSILON * w {
            return Ok(w);
        }
    }
    Ok(w)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the series in its accurate range.
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("log_beta needs a, b > 0, got {a}, {b}")));
    }
    Ok(ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b))
}

fn check_beta_args(q: f64, a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("beta needs a, b > 0, got {a}, {b}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("beta needs q in [0, 1], got {q}")));
    }
    Ok(())
}

/// Distribution function of Beta(a, b), i.e. the regularized incomplete beta `I_q(a, b)`.
pub fn beta_cdf(q: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(q, a, b)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    // The continued fraction converges fast only left of the mean; use
    // I_q(a, b) = 1 - I_{1-q}(b, a) on the other side.
    if q > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - incbeta_cf(1.0 - q, b, a)?)
    } else {
        incbeta_cf(q, a, b)
    }
}

/// `1 - I_q(a, b)` computed without cancellation.
pub fn beta_sf(q: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(q, a, b)?;
    beta_cdf(1.0 - q, b, a)
}

const CF_MAX_ITER: usize = 20_000;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn incbeta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let tiny = 1e-300;
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b));
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= 1e-16 {
            return Ok((front * h).clamp(0.0, 1.0));
        }
    }
    Err(Error::NoConvergence {
        what: "incomplete beta continued fraction",
        iterations: CF_MAX_ITER,
    })
}

/// Density of Beta(a, b). At the end points the analytic limit is returned
/// (possibly `+inf` when the corresponding shape is below one).
pub fn beta_pdf(q: f64, a: f64, b: f64) -> Result<f64> {
    check_beta_args(q, a, b)?;
    let ln_b = ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b);
    let edge = |shape: f64, other_factor: f64| -> f64 {
        if shape > 1.0 {
            0.0
        } else if shape == 1.0 {
            (other_factor - ln_b).exp()
        } else {
            f64::INFINITY
        }
    };
    if q == 0.0 {
        return Ok(edge(a, 0.0));
    }
    if q == 1.0 {
        return Ok(edge(b, 0.0));
    }
    Ok(((a - 1.0) * q.ln() + (b - 1.0) * (-q).ln_1p() - ln_b).exp())
}

/// Standard Normal distribution function Φ.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard Normal survival function `1 - Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn normal_log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        // Mills-ratio asymptotics; erfc underflows around x = -38.
        let x2 = x * x;
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Standard Normal density φ.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Standard Normal quantile Φ⁻¹(p) for `p` in `(0, 1)`.
///
/// Acklam's rational approximation (relative error about 1e-9) followed by one
/// Halley correction against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal_quantile needs p in (0, 1), got {p}")));
    }
    const P_LOW: f64 = 0.02425;
    let tail = |q: f64| {
        let c = &ACKLAM_C;
        let d = &ACKLAM_D;
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (-p).ln_1p()).sqrt())
    };
    // Work on the smaller tail to avoid cancellation in Φ(x) - p.
    let e = if x <= 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_sf(x)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Log density of the Dirichlet distribution with parameters `alpha` at the
/// interior simplex point `w`.
pub fn dirichlet_log_density(w: &[f64], alpha: &[f64]) -> Result<f64> {
    if w.len() != alpha.len() || w.len() < 2 {
        return Err(Error::domain(format!(
            "dirichlet needs matching dimensions >= 2, got {} and {}",
            w.len(),
            alpha.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::domain(format!("dirichlet parameter must be positive, got {a}")));
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::domain(format!("dirichlet point must be interior, got component {v}")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("dirichlet point must sum to 1, got {total}")));
    }
    let a_sum: f64 = alpha.iter().sum();
    let mut out = ln_gamma_pos(a_sum);
    for (wi, ai) in w.iter().zip(alpha) {
        out += (ai - 1.0) * wi.ln() - ln_gamma_pos(*ai);
    }
    Ok(out)
}
