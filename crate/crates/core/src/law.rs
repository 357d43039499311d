//! The conditional-distribution interface shared by parametric models,
//! fitted angular densities and posterior mixtures.

use crate::error::{Error, Result};
use crate::roots::invert_cdf;

/// A conditional law `G_{Y|X}(y | x)` on unit Fréchet margins.
pub trait ConditionalLaw: Sync {
    /// Number of covariates `p`.
    fn covariates(&self) -> usize;

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64>;

    /// `inf { y > 0 : G(y | x) >= q }`.
    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        let start = x.iter().copied().fold(f64::INFINITY, f64::min);
        invert_cdf(|y| self.conditional_cdf(y, x), q, start, x)
    }
}

impl<L: ConditionalLaw + ?Sized> ConditionalLaw for &L {
    fn covariates(&self) -> usize {
        (**self).covariates()
    }
    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        (**self).conditional_cdf(y, x)
    }
    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        (**self).conditional_quantile(q, x)
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn check_covariates(law_p: usize, x: &[f64]) -> Result<()> {
    if x.len() != law_p {
        return Err(Error::domain(format!("expected {law_p} covariates, got {}", x.len())));
    }
    for v in x {
        check_positive("covariate", *v)?;
    }
    Ok(())
}

/// Complete independence: `G(y | x) = exp(-1/y)` whatever `x` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Independence {
    pub p: usize,
}

impl ConditionalLaw for Independence {
    fn covariates(&self) -> usize {
        self.p
    }

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        check_covariates(self.p, x)?;
        check_positive("y", y)?;
        Ok((-1.0 / y).exp())
    }

    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        check_covariates(self.p, x)?;
        crate::models::independence_quantile(q)
    }
}
