//! Bracketed root finding for monotone conditional distribution functions.

use crate::error::{Error, Result};

/// Smallest and largest `y` tried while bracketing a quantile.
pub const BRACKET_MIN: f64 = 1e-8;
pub const BRACKET_MAX: f64 = 1e12;

/// Brent's method on a sign-changing bracket `[a, b]` of a fallible function.
///
/// Stops when the bracket is narrower than `xtol` (absolute, plus a few ulps)
/// or an exact zero is hit.
pub fn brent<F>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain("brent needs a sign change over the bracket"));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        what: "brent",
        iterations: max_iter,
    })
}

/// Smallest `y > 0` with `cdf(y) >= q` for a continuous non-decreasing `cdf`.
///
/// Brackets geometrically from `start` inside `[BRACKET_MIN, BRACKET_MAX]`,
/// then runs Brent on `ln y`. `context` is only used for error reports.
pub fn invert_cdf<F>(mut cdf: F, q: f64, start: f64, context: &[f64]) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must be in (0, 1), got {q}")));
    }
    let start = if start.is_finite() && start > 0.0 {
        start.clamp(BRACKET_MIN, BRACKET_MAX)
    } else {
        1.0
    };
    let mut g = |t: f64| -> Result<f64> { Ok(cdf(t.exp())? - q) };
    let (mut lo, mut hi) = (start.ln(), start.ln());
    let mut g_lo = g(lo)?;
    let mut g_hi = g_lo;
    let (t_min, t_max) = (BRACKET_MIN.ln(), BRACKET_MAX.ln());
    let mut step = std::f64::consts::LN_2;
    if g_lo < 0.0 {
        while g_hi < 0.0 {
            lo = hi;
            g_lo = g_hi;
            if hi >= t_max {
                return Err(bracket_error(q, context, lo.exp(), hi.exp(), g_lo + q, g_hi + q));
            }
            hi = (hi + step).min(t_max);
            step *= 1.5;
            g_hi = g(hi)?;
        }
    } else {
        while g_lo >= 0.0 {
            hi = lo;
            g_hi = g_lo;
            if lo <= t_min {
                if g_lo == 0.0 {
                    return Ok(lo.exp());
                }
                return Err(bracket_error(q, context, lo.exp(), hi.exp(), g_lo + q, g_hi + q));
            }
            lo = (lo - step).max(t_min);
            step *= 1.5;
            g_lo = g(lo)?;
        }
    }
    let t = brent(&mut g, lo, hi, g_lo, g_hi, 1e-14, 200)?;
    Ok(t.exp())
}

fn bracket_error(q: f64, x: &[f64], lo: f64, hi: f64, cdf_lo: f64, cdf_hi: f64) -> Error {
    Error::BracketNotFound {
        q,
        x: x.to_vec(),
        lo,
        hi,
        cdf_lo,
        cdf_hi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn invert_frechet_cdf() {
        let y = invert_cdf(|y| Ok((-1.0 / y).exp()), 0.5, 7.0, &[7.0]).unwrap();
        assert!((y + 1.0 / 0.5f64.ln()).abs() < 1e-12);
        let y = invert_cdf(|y| Ok((-1.0 / y).exp()), 0.999, 0.01, &[]).unwrap();
        assert!((y + 1.0 / 0.999f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn bracket_failure_for_defective_cdf() {
        let err = invert_cdf(|_| Ok(0.2), 0.5, 1.0, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::BracketNotFound { .. }));
        let err = invert_cdf(|_| Ok(0.9), 0.5, 1.0, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::BracketNotFound { .. }));
    }
}
