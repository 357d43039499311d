//! Regression manifolds: conditional quantiles `y_{q|x}` over a grid of
//! quantile levels and covariate values.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, round_sig, write_atomic};
use crate::law::{check_positive, ConditionalLaw};
use crate::models::{independence_quantile, EvModel};
use crate::roots::invert_cdf;
use crate::special::lambert_w0_exp;

/// `inf { y > 0 : cdf(y) >= q }` for the conditional CDF at covariate `x`.
///
/// Brackets geometrically from `y = x` and refines with Brent on `ln y`.
pub fn conditional_quantile<F>(cdf: F, q: f64, x: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_positive("x", x)?;
    invert_cdf(cdf, q, x, &[x])
}

/// Logistic conditional quantile through the Lambert W function.
///
/// `y = x [{((1-α)/α) x W(z)}^{1/α} - 1]^{-α}` with
/// `z = (α/(1-α)) x⁻¹ exp{(α/(1-α)) x⁻¹} q^{α/(α-1)}`; `W` is evaluated from
/// `ln z` so that large arguments do not overflow.
pub fn logistic_quantile_closed_form(alpha: f64, q: f64, x: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("closed form needs alpha in (0, 1), got {alpha}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must be in (0, 1), got {q}")));
    }
    check_positive("x", x)?;
    let c = alpha / (1.0 - alpha);
    let log_z = c.ln() - x.ln() + c / x + alpha / (alpha - 1.0) * q.ln();
    let w = lambert_w0_exp(log_z).map_err(|e| Error::ClosedForm(e.to_string()))?;
    let ln_s = x.ln() + w.ln() - c.ln();
    let inner = (ln_s / alpha).exp_m1();
    if !(inner > 0.0 && inner.is_finite()) {
        return Err(Error::ClosedForm(format!(
            "inner bracket {inner:e} at alpha = {alpha}, q = {q}, x = {x}"
        )));
    }
    let y = x * (-alpha * inner.ln()).exp();
    if y.is_finite() && y > 0.0 {
        Ok(y)
    } else {
        Err(Error::ClosedForm(format!("non-finite quantile at alpha = {alpha}, q = {q}, x = {x}")))
    }
}

/// Logistic conditional quantile: independence for `α = 1`, the closed form
/// otherwise, and numeric inversion wherever the closed form breaks down.
pub fn logistic_quantile(alpha: f64, q: f64, x: f64) -> Result<f64> {
    if alpha == 1.0 {
        return independence_quantile(q);
    }
    match logistic_quantile_closed_form(alpha, q, x) {
        Ok(y) => Ok(y),
        Err(Error::ClosedForm(_)) => {
            let model = EvModel::logistic(alpha)?;
            conditional_quantile(|y| model.conditional_cdf(y, x), q, x)
        }
        Err(e) => Err(e),
    }
}

/// `y_{q|x} ≈ γ_q + β_q x` for large `x` under the Logistic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearAsymptote {
    pub gamma_q: f64,
    pub beta_q: f64,
    pub q: f64,
    pub alpha: f64,
}

impl LinearAsymptote {
    pub fn eval(&self, x: f64) -> f64 {
        self.gamma_q + self.beta_q * x
    }
}

/// Slope and intercept of the Logistic regression line as `x → ∞`.
///
/// With `R = q^{-1/(1-α)}` and `r = q^{-α/(1-α)}`:
/// `β_q = (R - 1)^{-α}` and `γ_q = (α/(1-α)) R (r - 1) (R - 1)^{-α-1}`.
pub fn logistic_linear_asymptote(alpha: f64, q: f64) -> Result<LinearAsymptote> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("asymptote needs alpha in (0, 1), got {alpha}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must be in (0, 1), got {q}")));
    }
    let ln_q = q.ln();
    let big_r = (-ln_q / (1.0 - alpha)).exp();
    let r_m1 = (-alpha * ln_q / (1.0 - alpha)).exp_m1();
    let big_r_m1 = (-ln_q / (1.0 - alpha)).exp_m1();
    let beta_q = big_r_m1.powf(-alpha);
    let gamma_q = alpha / (1.0 - alpha) * big_r * r_m1 * big_r_m1.powf(-alpha - 1.0);
    Ok(LinearAsymptote {
        gamma_q,
        beta_q,
        q,
        alpha,
    })
}

/// Pointwise credible bands around a posterior-mean manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBands {
    pub level: f64,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

/// `values[i][j]` is `y_{q_i | x_j}`. Each covariate point `x_grid[j]` has
/// one coordinate per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionManifold {
    pub q_levels: Vec<f64>,
    pub x_grid: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<CredibleBands>,
}

/// `{0.1, 0.2, …, 0.9}`.
pub fn default_q_levels() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// 100 log-spaced covariate values from 0.1 to 20.
pub fn default_x_grid() -> Vec<f64> {
    log_grid(0.1, 20.0, 100)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Evaluates `law.conditional_quantile` at every `(q, x)` cell in parallel.
pub fn manifold_grid<L: ConditionalLaw + ?Sized>(law: &L, q_levels: &[f64], x_grid: &[Vec<f64>]) -> Result<RegressionManifold> {
    for q in q_levels {
        if !(*q > 0.0 && *q < 1.0) {
            return Err(Error::domain(format!("quantile level must be in (0, 1), got {q}")));
        }
    }
    let cells: Vec<(usize, usize)> = (0..q_levels.len())
        .flat_map(|i| (0..x_grid.len()).map(move |j| (i, j)))
        .collect();
    let flat = cells
        .par_iter()
        .map(|&(i, j)| {
            law.conditional_quantile(q_levels[i], &x_grid[j])
                .map_err(|e| Error::Inversion {
                    q: q_levels[i],
                    x: x_grid[j].clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = flat.chunks(x_grid.len().max(1)).map(<[f64]>::to_vec).collect();
    let m = RegressionManifold {
        q_levels: q_levels.to_vec(),
        x_grid: x_grid.to_vec(),
        values,
        bands: None,
    };
    if let Some((i, j)) = m.first_q_violation(1e-9) {
        log::warn!(
            "manifold not monotone in q at q = {}, x = {:?}",
            m.q_levels[i],
            m.x_grid[j]
        );
    }
    Ok(m)
}

/// Wraps a scalar covariate grid as one-covariate points.
pub fn scalar_grid(x: &[f64]) -> Vec<Vec<f64>> {
    x.iter().map(|v| vec![*v]).collect()
}

impl RegressionManifold {
    pub fn covariates(&self) -> usize {
        self.x_grid.first().map_or(1, Vec::len)
    }

    /// First `(q index, x index)` where `y` decreases in `q` by more than `tol`.
    /// Levels are compared in increasing order whatever the stored order.
    pub fn first_q_violation(&self, tol: f64) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.q_levels.len()).collect();
        order.sort_by(|a, b| self.q_levels[*a].total_cmp(&self.q_levels[*b]));
        for j in 0..self.x_grid.len() {
            for w in order.windows(2) {
                if self.values[w[0]][j] > self.values[w[1]][j] + tol {
                    return Some((w[1], j));
                }
            }
        }
        None
    }

    /// Same manifold with every number rounded to the serialized precision.
    pub fn rounded(&self) -> Self {
        let r2 = |m: &Vec<Vec<f64>>| m.iter().map(|row| row.iter().map(|v| round_sig(*v)).collect()).collect();
        RegressionManifold {
            q_levels: self.q_levels.iter().map(|v| round_sig(*v)).collect(),
            x_grid: r2(&self.x_grid),
            values: r2(&self.values),
            bands: self.bands.as_ref().map(|b| CredibleBands {
                level: round_sig(b.level),
                lower: r2(&b.lower),
                upper: r2(&b.upper),
            }),
        }
    }

    fn check_shape(&self) -> Result<()> {
        let (nq, nx) = (self.q_levels.len(), self.x_grid.len());
        let ok = |m: &Vec<Vec<f64>>| m.len() == nq && m.iter().all(|r| r.len() == nx);
        let p = self.covariates();
        if !ok(&self.values)
            || self.x_grid.iter().any(|x| x.len() != p)
            || self.bands.as_ref().is_some_and(|b| !ok(&b.lower) || !ok(&b.upper))
        {
            return Err(Error::Data("manifold arrays have inconsistent shapes".into()));
        }
        Ok(())
    }

    /// Long-format CSV: `q,x,y[,lo,hi]`, or `q,x1,…,xp,y[,lo,hi]` for `p > 1`.
    pub fn to_csv_string(&self) -> Result<String> {
        self.check_shape()?;
        let p = self.covariates();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["q".to_string()];
        if p == 1 {
            header.push("x".into());
        } else {
            header.extend((1..=p).map(|i| format!("x{i}")));
        }
        header.push("y".into());
        if self.bands.is_some() {
            header.extend(["lo".to_string(), "hi".to_string()]);
        }
        w.write_record(&header)?;
        for (i, q) in self.q_levels.iter().enumerate() {
            for (j, x) in self.x_grid.iter().enumerate() {
                let mut rec = vec![fmt_sig(*q)];
                rec.extend(x.iter().map(|v| fmt_sig(*v)));
                rec.push(fmt_sig(self.values[i][j]));
                if let Some(b) = &self.bands {
                    rec.push(fmt_sig(b.lower[i][j]));
                    rec.push(fmt_sig(b.upper[i][j]));
                }
                w.write_record(&rec)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let has_bands = header.last().is_some_and(|h| h == "hi");
        let n_cov = header.len() - 2 - if has_bands { 2 } else { 0 };
        if n_cov == 0 || header.first().map(String::as_str) != Some("q") {
            return Err(Error::Data(format!("unexpected manifold header {header:?}")));
        }
        let mut q_levels: Vec<f64> = Vec::new();
        let mut x_grid: Vec<Vec<f64>> = Vec::new();
        let mut rows: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Data(format!("bad number in manifold CSV: {e}")))?;
            if nums.len() != header.len() {
                return Err(Error::Data("ragged manifold CSV row".into()));
            }
            let q = nums[0];
            let x = nums[1..=n_cov].to_vec();
            let qi = position_or_push(&mut q_levels, q, |a, b| a.to_bits() == b.to_bits());
            let xi = position_or_push(&mut x_grid, x, |a, b| a == b);
            let (lo, hi) = if has_bands {
                (nums[n_cov + 2], nums[n_cov + 3])
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push((qi, xi, nums[n_cov + 1], lo, hi));
        }
        let grid = |fill: f64| vec![vec![fill; x_grid.len()]; q_levels.len()];
        let (mut values, mut lower, mut upper) = (grid(f64::NAN), grid(f64::NAN), grid(f64::NAN));
        for (qi, xi, y, lo, hi) in rows {
            values[qi][xi] = y;
            lower[qi][xi] = lo;
            upper[qi][xi] = hi;
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Data("manifold CSV does not cover the full (q, x) grid".into()));
        }
        Ok(RegressionManifold {
            q_levels,
            x_grid,
            values,
            bands: None,
        }
        .with_bands_if(has_bands, lower, upper))
    }

    fn with_bands_if(mut self, has: bool, lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> Self {
        if has {
            self.bands = Some(CredibleBands {
                // the CSV does not carry the level
                level: f64::NAN,
                lower,
                upper,
            });
        }
        self
    }

    /// JSON with `q_levels`, `x_grid`, `values` and optional `bands`.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        self.check_shape()?;
        crate::io::write_json(path, &self.rounded())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let m: Self = crate::io::read_json(path)?;
        m.check_shape()?;
        Ok(m)
    }
}

fn position_or_push<T>(v: &mut Vec<T>, item: T, eq: impl Fn(&T, &T) -> bool) -> usize {
    match v.iter().position(|e| eq(e, &item)) {
        Some(i) => i,
        None => {
            v.push(item);
            v.len() - 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Independence;
    use rand::{Rng, SeedableRng};

    #[test]
    fn independence_quantile_by_inversion() {
        for x in [0.3, 1.0, 12.0] {
            let y = conditional_quantile(|y: f64| Ok((-1.0 / y).exp()), 0.5, x).unwrap();
            assert!((y - std::f64::consts::LOG2_E).abs() < 1e-9);
        }
    }

    #[test]
    fn inversion_round_trip() {
        let m = EvModel::scenario(3).unwrap();
        for (y0, x) in [(0.4, 1.0), (3.0, 2.0), (25.0, 0.5)] {
            let q = m.conditional_cdf(y0, x).unwrap();
            let y = conditional_quantile(|y| m.conditional_cdf(y, x), q, x).unwrap();
            assert!((y - y0).abs() < 1e-8 * y0);
            assert!((m.conditional_cdf(y, x).unwrap() - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn flat_cdf_reports_bracket_failure() {
        let err = conditional_quantile(|_| Ok(0.2), 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::BracketNotFound { .. }));
    }

    #[test]
    fn closed_form_round_trip() {
        let m = EvModel::logistic(0.5).unwrap();
        let y = logistic_quantile_closed_form(0.5, 0.5, 1.0).unwrap();
        assert!((m.conditional_cdf(y, 1.0).unwrap() - 0.5).abs() < 1e-7);
        let inv = conditional_quantile(|y| m.conditional_cdf(y, 1.0), 0.5, 1.0).unwrap();
        assert!((y - inv).abs() < 1e-8);
        let m9 = EvModel::logistic(0.9).unwrap();
        let y9 = logistic_quantile_closed_form(0.9, 0.5, 20.0).unwrap();
        let inv9 = conditional_quantile(|y| m9.conditional_cdf(y, 20.0), 0.5, 20.0).unwrap();
        assert!((y9 - inv9).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_root_finder_randomly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let alpha = rng.random_range(0.05..0.95);
            let q = rng.random_range(0.05..0.95);
            let x = rng.random_range(0.1..=50.0);
            let m = EvModel::logistic(alpha).unwrap();
            let inv = conditional_quantile(|y| m.conditional_cdf(y, x), q, x).unwrap();
            let cf = logistic_quantile(alpha, q, x).unwrap();
            assert!((cf - inv).abs() <= 1e-6 * inv, "alpha {alpha} q {q} x {x}: {cf} vs {inv}");
        }
    }

    #[test]
    fn asymptote_slope_and_intercept() {
        let a = logistic_linear_asymptote(0.5, 0.5).unwrap();
        assert!((a.beta_q - 3f64.powf(-0.5)).abs() < 1e-14);
        // Richardson on y(x) - βx = γ + c/x + …
        let g = |x: f64| logistic_quantile_closed_form(0.5, 0.5, x).unwrap() - a.beta_q * x;
        let limit = (10.0 * g(1e4) - g(1e3)) / 9.0;
        assert!((a.gamma_q - limit).abs() < 1e-3, "{} vs {limit}", a.gamma_q);
        let y = logistic_quantile_closed_form(0.5, 0.5, 1e6).unwrap();
        assert!((y / 1e6 - a.beta_q).abs() < 1e-6);
    }

    #[test]
    fn asymptote_close_at_moderate_dependence() {
        for alpha in [0.1, 0.4] {
            for q in [0.1, 0.5, 0.9] {
                let a = logistic_linear_asymptote(alpha, q).unwrap();
                let y = logistic_quantile(alpha, q, 100.0).unwrap();
                assert!((a.eval(100.0) - y).abs() / y < 0.01, "alpha {alpha} q {q}");
            }
        }
    }

    #[test]
    fn grid_shapes_and_independence_rows() {
        let x = scalar_grid(&log_grid(0.1, 20.0, 50));
        let m = manifold_grid(&Independence { p: 1 }, &[0.1, 0.5, 0.9], &x).unwrap();
        assert_eq!(m.values.len(), 3);
        assert!(m.values.iter().all(|r| r.len() == 50));
        for row in &m.values {
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-9));
        }
        assert_eq!(default_x_grid().len(), 100);
        assert_eq!(*default_x_grid().last().unwrap(), 20.0);
        assert_eq!(default_q_levels().len(), 9);
    }

    #[test]
    fn strong_logistic_hugs_diagonal() {
        let x = scalar_grid(&[1.0, 5.0, 15.0]);
        let m = manifold_grid(&EvModel::logistic(0.1).unwrap(), &[0.5], &x).unwrap();
        for (j, xv) in [1.0, 5.0, 15.0].iter().enumerate() {
            assert!((m.values[0][j] / xv - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn grid_errors_carry_location() {
        struct Broken;
        impl ConditionalLaw for Broken {
            fn covariates(&self) -> usize {
                1
            }
            fn conditional_cdf(&self, _y: f64, _x: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
        }
        let err = manifold_grid(&Broken, &[0.3], &scalar_grid(&[2.0])).unwrap_err();
        match err {
            Error::Inversion { q, x, .. } => {
                assert_eq!(q, 0.3);
                assert_eq!(x, vec![2.0]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = scalar_grid(&log_grid(0.1, 20.0, 7));
        let mut m = manifold_grid(&EvModel::scenario(1).unwrap(), &[0.25, 0.5], &x).unwrap();
        m.bands = Some(CredibleBands {
            level: 0.95,
            lower: m.values.iter().map(|r| r.iter().map(|v| v * 0.9).collect()).collect(),
            upper: m.values.iter().map(|r| r.iter().map(|v| v * 1.1).collect()).collect(),
        });
        let csv_path = dir.path().join("m.csv");
        m.write_csv(&csv_path).unwrap();
        let back = RegressionManifold::read_csv(&csv_path).unwrap();
        let r = m.rounded();
        assert_eq!(back.values, r.values);
        assert_eq!(back.x_grid, r.x_grid);
        assert_eq!(back.bands.as_ref().unwrap().upper, r.bands.as_ref().unwrap().upper);
        let csv2 = dir.path().join("m2.csv");
        back.write_csv(&csv2).unwrap();
        assert_eq!(std::fs::read(&csv_path).unwrap(), std::fs::read(&csv2).unwrap());

        let json_path = dir.path().join("m.json");
        m.write_json(&json_path).unwrap();
        assert_eq!(RegressionManifold::read_json(&json_path).unwrap(), r);
    }

    #[test]
    fn multi_covariate_csv_header() {
        let m = RegressionManifold {
            q_levels: vec![0.5],
            x_grid: vec![vec![1.0, 2.0]],
            values: vec![vec![1.5]],
            bands: None,
        };
        let s = m.to_csv_string().unwrap();
        assert!(s.starts_with("q,x1,x2,y\n"));
    }
}
