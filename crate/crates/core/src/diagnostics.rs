//! Quantile residuals `Φ⁻¹(G(y_i | x_i))` for pairs above the radial threshold.
//!
//! The conditional CDF is continuous, so no randomization is needed.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, write_atomic};
use crate::law::ConditionalLaw;
use crate::models::FrechetPair;
use crate::pipeline::average_ranks;
use crate::special::{normal_cdf, normal_quantile};

/// Bounds applied to `G` before the Normal quantile.
pub const CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Positions in the input of the pairs with `x + y > u`.
    pub indices: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ghat: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `Φ⁻¹((rank - 0.5) / n)` for each residual's rank; ties share the average rank.
    pub theoretical_quantiles: Vec<f64>,
    pub clamped: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

/// Residuals of a one-covariate law on the pairs with `x + y > threshold_u`.
pub fn quantile_residuals<L: ConditionalLaw + ?Sized>(law: &L, pairs: &[FrechetPair], threshold_u: f64) -> Result<ResidualReport> {
    if law.covariates() != 1 {
        return Err(Error::domain("quantile residuals need a one-covariate law"));
    }
    let indices: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].x + pairs[i].y > threshold_u).collect();
    let ghat = indices
        .par_iter()
        .map(|&i| law.conditional_cdf(pairs[i].y, &[pairs[i].x]))
        .collect::<Result<Vec<f64>>>()?;
    let mut clamped = 0;
    let mut residuals = Vec::with_capacity(ghat.len());
    for g in &ghat {
        let c = g.clamp(CLAMP, 1.0 - CLAMP);
        if c != *g {
            clamped += 1;
        }
        residuals.push(normal_quantile(c)?);
    }
    if clamped > 0 {
        log::warn!("{clamped} conditional CDF values clamped to [{CLAMP:e}, 1 - {CLAMP:e}]");
    }
    let n = residuals.len() as f64;
    let theoretical = average_ranks(&residuals)
        .into_iter()
        .map(|r| normal_quantile((r - 0.5) / n))
        .collect::<Result<Vec<f64>>>()?;
    let (ks_statistic, ks_p_value) = ks_normal(&residuals);
    Ok(ResidualReport {
        x: indices.iter().map(|&i| pairs[i].x).collect(),
        y: indices.iter().map(|&i| pairs[i].y).collect(),
        indices,
        ghat,
        residuals,
        theoretical_quantiles: theoretical,
        clamped,
        ks_statistic,
        ks_p_value,
    })
}

/// One-sample Kolmogorov–Smirnov statistic against the standard Normal and
/// its asymptotic p-value. An empty sample gives `(0, 1)`.
pub fn ks_normal(sample: &[f64]) -> (f64, f64) {
    if sample.is_empty() {
        return (0.0, 1.0);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = normal_cdf(*v);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_sf((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d))
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

impl ResidualReport {
    /// CSV `index,x,y,ghat,residual,theoretical`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "x", "y", "ghat", "residual", "theoretical"])?;
        for i in 0..self.indices.len() {
            w.write_record([
                self.indices[i].to_string(),
                fmt_sig(self.x[i]),
                fmt_sig(self.y[i]),
                fmt_sig(self.ghat[i]),
                fmt_sig(self.residuals[i]),
                fmt_sig(self.theoretical_quantiles[i]),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Independence;

    struct Half;
    impl ConditionalLaw for Half {
        fn covariates(&self) -> usize {
            1
        }
        fn conditional_cdf(&self, _y: f64, _x: &[f64]) -> Result<f64> {
            Ok(0.5)
        }
    }

    struct Extreme;
    impl ConditionalLaw for Extreme {
        fn covariates(&self) -> usize {
            1
        }
        fn conditional_cdf(&self, y: f64, _x: &[f64]) -> Result<f64> {
            Ok(if y > 1.0 { 1.0 } else { 0.0 })
        }
    }

    #[test]
    fn median_gives_zero_residual() {
        let r = quantile_residuals(&Half, &[FrechetPair { x: 3.0, y: 4.0 }], 1.0).unwrap();
        assert_eq!(r.residuals, vec![0.0]);
        assert_eq!(r.theoretical_quantiles, vec![0.0]);
    }

    #[test]
    fn no_exceedances_is_empty() {
        let r = quantile_residuals(&Half, &[FrechetPair { x: 0.1, y: 0.1 }], 10.0).unwrap();
        assert!(r.residuals.is_empty());
        assert_eq!(r.ks_p_value, 1.0);
    }

    #[test]
    fn clamping_is_counted() {
        let pairs = [FrechetPair { x: 1.0, y: 0.5 }, FrechetPair { x: 1.0, y: 5.0 }];
        let r = quantile_residuals(&Extreme, &pairs, 0.0).unwrap();
        assert_eq!(r.clamped, 2);
        assert!(r.residuals.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn permutation_invariance() {
        let pairs: Vec<FrechetPair> = (1..40)
            .map(|i| FrechetPair {
                x: 0.5 + i as f64 * 0.1,
                y: 0.3 + ((i * 7) % 11) as f64,
            })
            .collect();
        let law = Independence { p: 1 };
        let a = quantile_residuals(&law, &pairs, 2.0).unwrap();
        let mut rev = pairs.clone();
        rev.reverse();
        let b = quantile_residuals(&law, &rev, 2.0).unwrap();
        let n = pairs.len();
        for (k, &i) in a.indices.iter().enumerate() {
            let kb = b.indices.iter().position(|&j| j == n - 1 - i).unwrap();
            assert_eq!(a.residuals[k], b.residuals[kb]);
            assert_eq!(a.theoretical_quantiles[k], b.theoretical_quantiles[kb]);
        }
    }

    #[test]
    fn kolmogorov_tail() {
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
    }
}
