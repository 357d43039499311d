//! Regression of block-maxima responses on block-maxima covariates.
//!
//! The crate covers the whole path from raw price series to predicted tail
//! quantiles: parametric bivariate extreme-value models ([`models`]),
//! Bernstein-polynomial angular densities ([`angular`]), Bayesian fitting by
//! single-component adaptive Metropolis ([`mcmc`]), regression manifolds
//! ([`manifold`]), the block-maxima data pipeline ([`pipeline`]) and
//! quantile-residual diagnostics ([`diagnostics`]).
//!
//! Throughout, bivariate data are ordered `(x, y)` with the covariate first;
//! in `d` dimensions the response is the last coordinate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod law;
pub mod manifold;
pub mod mcmc;
pub mod models;
pub mod pipeline;
pub mod quadrature;
pub mod roots;
pub mod seed;
pub mod special;

pub use angular::{
    decompose, enumerate_compositions, weights_from_logits, BernsteinAngularDensity,
    BernsteinBasis, CompositionIndex, PseudoAngleSample, QuadratureConfig,
};
pub use diagnostics::{quantile_residuals, ResidualReport};
pub use error::{Error, Result};
pub use law::{ConditionalLaw, Independence};
pub use manifold::{
    conditional_quantile, logistic_linear_asymptote, logistic_quantile,
    logistic_quantile_closed_form, manifold_grid, CredibleBands, LinearAsymptote,
    RegressionManifold,
};
pub use mcmc::{
    effective_sample_size, log_posterior, posterior_manifold, run_chain, Degree, McmcChain,
    McmcConfig, PosteriorLaw,
};
pub use models::{EvModel, FrechetPair};
pub use pipeline::{BlockMaximaSeries, EmpiricalMargin, PriceSeries};
