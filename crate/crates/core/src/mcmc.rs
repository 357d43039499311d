//! Bayesian fit of a Bernstein angular density by single-component adaptive
//! Metropolis on the free logits.
//!
//! The target is the constrained Dirichlet prior `dir(π; c 1_m)` on the full
//! weight vector times the likelihood `Π h(w_i)` of the pseudo-angles,
//! carried to the logits by the Jacobian of the logit map.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{BernsteinAngularDensity, BernsteinBasis, PseudoAngleSample};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::law::{check_covariates, ConditionalLaw};
use crate::manifold::{CredibleBands, RegressionManifold};
use crate::roots::invert_cdf;
use crate::seed::{derive_seed, rng};
use crate::special::ln_gamma_pos;

/// Bernstein degree: fixed, or chosen so the number of basis functions
/// `C(J-1, d-1)` is the number of exceedances (`J = k + 1` when `d = 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    Auto,
    Fixed(usize),
}

impl Degree {
    pub fn resolve(&self, k: usize, d: usize) -> Result<usize> {
        match *self {
            Degree::Fixed(j) if j >= d => Ok(j),
            Degree::Fixed(j) => Err(Error::domain(format!("degree J = {j} is below the dimension {d}"))),
            Degree::Auto => {
                let mut j = d;
                let mut m = 1.0f64;
                while m < k as f64 {
                    // C(j, d-1) = C(j-1, d-1) · j / (j - d + 1)
                    m = m * j as f64 / (j - d + 1) as f64;
                    j += 1;
                }
                Ok(j)
            }
        }
    }
}

impl Serialize for Degree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Degree::Auto => s.serialize_str("auto"),
            Degree::Fixed(j) => s.serialize_u64(*j as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Degree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(j) => Ok(Degree::Fixed(j)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Degree {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(Degree::Auto)
        } else {
            s.parse()
                .map(Degree::Fixed)
                .map_err(|_| Error::domain(format!("degree must be `auto` or an integer, got `{s}`")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_concentration: f64,
    pub degree: Degree,
    pub seed: u64,
    pub target_accept: f64,
    pub adapt_window: usize,
    /// Starting standard deviation of every coordinate's Gaussian step.
    pub initial_step: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 4_000,
            prior_concentration: 0.1,
            degree: Degree::Auto,
            seed: 0,
            target_accept: 0.44,
            adapt_window: 50,
            initial_step: 0.5,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::domain(format!(
                "burn_in ({}) must be below iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.prior_concentration > 0.0 && self.prior_concentration.is_finite()) {
            return Err(Error::domain("prior concentration must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::domain("target acceptance must be in (0, 1)"));
        }
        if self.adapt_window == 0 {
            return Err(Error::domain("adapt_window must be at least 1"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::domain("initial step must be positive"));
        }
        Ok(())
    }
}

/// Post burn-in output of [`run_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcChain {
    #[serde(rename = "J")]
    pub j: usize,
    pub d: usize,
    pub seed: u64,
    pub states: Vec<Vec<f64>>,
    pub log_posterior_trace: Vec<f64>,
    pub acceptance_rate_per_coordinate: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Log posterior on the free logits. Returns `-inf` when the corner weights
/// come out negative.
pub fn log_posterior(free_logits: &[f64], sample: &PseudoAngleSample, config: &McmcConfig) -> Result<f64> {
    let j = config.degree.resolve(sample.k, sample.d)?;
    Posterior::new(BernsteinBasis::new(j, sample.d)?, sample, config.prior_concentration)?.log_density(free_logits)
}

/// Likelihood matrix and prior constants for one `(sample, basis, c)`.
pub struct Posterior {
    basis: Arc<BernsteinBasis>,
    /// `dir(w_i; α)` for free compositions, row-major `k × n_free`.
    free_terms: Vec<f64>,
    /// `dir(w_i; a_k)` for the corners, row-major `k × d`.
    corner_terms: Vec<f64>,
    k: usize,
    c: f64,
    prior_const: f64,
    /// Composition components of the free set, row-major `n_free × d`.
    free_alpha: Vec<f64>,
}

impl Posterior {
    pub fn new(basis: Arc<BernsteinBasis>, sample: &PseudoAngleSample, c: f64) -> Result<Self> {
        if sample.d != basis.dim() {
            return Err(Error::domain("sample and basis dimensions differ"));
        }
        if !(c > 0.0) {
            return Err(Error::domain("prior concentration must be positive"));
        }
        let (n, nc) = (basis.n_free(), basis.corner_indices().len());
        let mut free_terms = Vec::with_capacity(sample.k * n);
        let mut corner_terms = Vec::with_capacity(sample.k * nc);
        for w in &sample.angles {
            let t = basis.dirichlet_terms(w)?;
            free_terms.extend(basis.free_indices().iter().map(|&i| t[i]));
            corner_terms.extend(basis.corner_indices().iter().map(|&i| t[i]));
        }
        let m = basis.len() as f64;
        let prior_const = if basis.len() > 1 {
            ln_gamma_pos(m * c) - m * ln_gamma_pos(c)
        } else {
            0.0
        };
        let free_alpha = basis
            .free_indices()
            .iter()
            .flat_map(|&i| basis.compositions()[i].alpha.iter().map(|&a| a as f64))
            .collect();
        Ok(Self {
            basis,
            free_terms,
            corner_terms,
            k: sample.k,
            c,
            prior_const,
            free_alpha,
        })
    }

    pub fn basis(&self) -> &Arc<BernsteinBasis> {
        &self.basis
    }

    /// Corner weights and `ln Z` at the state's logits, computed exactly as
    /// [`BernsteinBasis::weights`] does so that every state the chain keeps
    /// rebuilds to valid weights. `None` outside the valid region.
    fn corners(&self, st: &State) -> Option<(Vec<f64>, f64)> {
        let (w, ln_z) = self.basis.weights_and_log_z(&st.theta).ok()?;
        if self.basis.n_free() == 0 {
            return Some((w, ln_z));
        }
        let c: Vec<f64> = self.basis.corner_indices().iter().map(|&i| w[i]).collect();
        c.iter().all(|v| *v > 0.0).then_some((c, ln_z))
    }

    fn eval(&self, st: &State) -> f64 {
        let d = self.basis.corner_indices().len();
        let Some((corners, ln_z)) = self.corners(st) else {
            return f64::NEG_INFINITY;
        };
        let inv_z = (-ln_z).exp();
        let mut ll = 0.0;
        for i in 0..self.k {
            let ct = &self.corner_terms[i * d..(i + 1) * d];
            let h = st.s[i] * inv_z + corners.iter().zip(ct).map(|(c, t)| c * t).sum::<f64>();
            ll += h.ln();
        }
        if self.basis.n_free() == 0 {
            return ll;
        }
        let n = self.basis.n_free() as f64;
        let corner_sum: f64 = corners.iter().sum();
        let sum_ln_free = st.theta.iter().sum::<f64>() - n * ln_z;
        let sum_ln_corner: f64 = corners.iter().map(|c| c.ln()).sum();
        ll + self.prior_const + self.c * sum_ln_free + (self.c - 1.0) * sum_ln_corner + corner_sum.ln()
    }

    fn state(&self, logits: &[f64]) -> Result<State> {
        if logits.len() != self.basis.n_free() {
            return Err(Error::domain(format!(
                "expected {} logits, got {}",
                self.basis.n_free(),
                logits.len()
            )));
        }
        Ok(State::new(self, logits))
    }

    pub fn log_density(&self, logits: &[f64]) -> Result<f64> {
        if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite logit {v}")));
        }
        Ok(self.eval(&self.state(logits)?))
    }

    /// Analytic gradient of [`Posterior::log_density`]; `None` outside the
    /// valid region.
    pub fn gradient(&self, logits: &[f64]) -> Result<Option<Vec<f64>>> {
        let st = self.state(logits)?;
        let Some((corners, ln_z)) = self.corners(&st) else {
            return Ok(None);
        };
        let inv_z = (-ln_z).exp();
        let (n, d) = (self.basis.n_free(), self.basis.dim());
        if n == 0 {
            return Ok(Some(Vec::new()));
        }
        let jd = (self.basis.degree() - self.basis.dim()) as f64;
        let pi: Vec<f64> = st.e.iter().map(|e| e * inv_z).collect();
        let s_free: f64 = pi.iter().sum();
        let mut t = vec![0.0; d];
        for (fa, p) in self.free_alpha.chunks_exact(d).zip(&pi) {
            for (tk, a) in t.iter_mut().zip(fa) {
                *tk += a * p;
            }
        }
        // dc[b][k] = ∂c_k / ∂θ_b
        let dc: Vec<f64> = (0..n)
            .flat_map(|b| {
                let (pb, t, fa) = (pi[b], &t, &self.free_alpha);
                (0..d).map(move |k| -pb * ((fa[b * d + k] - t[k]) - (1.0 - s_free)) / jd)
            })
            .collect();
        let mut g = vec![0.0; n];
        for i in 0..self.k {
            let ft = &self.free_terms[i * n..(i + 1) * n];
            let ct = &self.corner_terms[i * d..(i + 1) * d];
            let mix_free = st.s[i] * inv_z;
            let h = mix_free + corners.iter().zip(ct).map(|(c, t)| c * t).sum::<f64>();
            for b in 0..n {
                let dh = pi[b] * (ft[b] - mix_free) + (0..d).map(|k| ct[k] * dc[b * d + k]).sum::<f64>();
                g[b] += dh / h;
            }
        }
        for b in 0..n {
            let dsum_ln_corner: f64 = (0..d).map(|k| dc[b * d + k] / corners[k]).sum();
            g[b] += self.c * (1.0 - n as f64 * pi[b]) + (self.c - 1.0) * dsum_ln_corner - pi[b];
        }
        Ok(Some(g))
    }
}

// Sampler state: e = exp(θ) and S_i = Σ e_α dir(w_i; α) over the free set.
struct State {
    theta: Vec<f64>,
    e: Vec<f64>,
    s: Vec<f64>,
}

/// Largest logit magnitude the sampler will visit.
pub const MAX_LOGIT: f64 = 300.0;

// An update that cancels more than this factor of magnitude rebuilds the sum.
const CANCELLATION: f64 = 1e4;

impl State {
    fn new(p: &Posterior, logits: &[f64]) -> Self {
        let e: Vec<f64> = logits.iter().map(|v| v.exp()).collect();
        let mut st = Self {
            theta: logits.to_vec(),
            e,
            s: vec![0.0; p.k],
        };
        for i in 0..p.k {
            st.rebuild(p, i);
        }
        st
    }

    fn rebuild(&mut self, p: &Posterior, i: usize) {
        let n = p.basis.n_free();
        self.s[i] = p.free_terms[i * n..(i + 1) * n].iter().zip(&self.e).map(|(a, b)| a * b).sum();
    }

    /// Moves coordinate `b` to `new_theta`, updating the sums in place.
    fn set(&mut self, p: &Posterior, b: usize, new_theta: f64) {
        let n = p.basis.n_free();
        let new_e = new_theta.exp();
        let de = new_e - self.e[b];
        self.e[b] = new_e;
        self.theta[b] = new_theta;
        for i in 0..p.k {
            let step = de * p.free_terms[i * n + b];
            let next = self.s[i] + step;
            if (self.s[i] + step.abs()) > CANCELLATION * next {
                self.rebuild(p, i);
            } else {
                self.s[i] = next;
            }
        }
    }
}

/// Runs the sampler on the exceedances in `sample`. Needs `k >= d + 1`.
pub fn run_chain(sample: &PseudoAngleSample, config: &McmcConfig) -> Result<McmcChain> {
    if sample.k < sample.d + 1 {
        return Err(Error::InsufficientExceedances {
            k: sample.k,
            required: sample.d + 1,
        });
    }
    let j = config.degree.resolve(sample.k, sample.d)?;
    run_with_basis(sample, BernsteinBasis::new(j, sample.d)?, config)
}

/// Runs the sampler on any sample, including an empty one (prior only).
pub fn run_with_basis(sample: &PseudoAngleSample, basis: Arc<BernsteinBasis>, config: &McmcConfig) -> Result<McmcChain> {
    config.validate()?;
    let post = Posterior::new(basis, sample, config.prior_concentration)?;
    let n = post.basis.n_free();
    let mut rng = rng(derive_seed(config.seed, "mcmc"));
    let mut state = post.state(&vec![0.0; n])?;
    let mut lp = post.eval(&state);
    if !lp.is_finite() {
        return Err(Error::domain("posterior is not finite at the zero-logit start"));
    }
    let mut log_step = vec![config.initial_step.ln(); n];
    let mut window_acc = vec![0usize; n];
    let mut kept_acc = vec![0usize; n];
    let mut n_windows = 0usize;
    let keep = config.iterations - config.burn_in;
    let mut states = Vec::with_capacity(keep);
    let mut trace = Vec::with_capacity(keep);
    let mut warnings = Vec::new();
    let mut frozen: Option<Vec<f64>> = None;

    for iter in 0..config.iterations {
        for b in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let old = state.theta[b];
            let prop = old + log_step[b].exp() * z;
            // Proposals beyond the cap are rejected so the exp(θ) sums stay finite.
            if prop.abs() >= MAX_LOGIT {
                continue;
            }
            state.set(&post, b, prop);
            let lp_new = post.eval(&state);
            if lp_new > f64::NEG_INFINITY && u.ln() < lp_new - lp {
                lp = lp_new;
                window_acc[b] += 1;
                if iter >= config.burn_in {
                    kept_acc[b] += 1;
                }
            } else {
                state.set(&post, b, old);
            }
        }
        // Rebuild the running sums once per sweep to stop rounding drift.
        state = post.state(&state.theta.clone())?;
        lp = post.eval(&state);

        if (iter + 1) % config.adapt_window == 0 && n > 0 {
            if window_acc.iter().all(|a| *a == 0) {
                warnings.push(format!(
                    "all proposals rejected in the window ending at iteration {}",
                    iter + 1
                ));
                log::warn!("{}", warnings.last().expect("just pushed"));
            }
            if iter < config.burn_in {
                n_windows += 1;
                let delta = (1.0 / (n_windows as f64).sqrt()).min(0.05);
                for b in 0..n {
                    let rate = window_acc[b] as f64 / config.adapt_window as f64;
                    log_step[b] += if rate > config.target_accept { delta } else { -delta };
                }
            }
            window_acc.iter_mut().for_each(|a| *a = 0);
        }
        if iter >= config.burn_in {
            match &frozen {
                None => frozen = Some(log_step.clone()),
                Some(f) => debug_assert_eq!(f, &log_step, "step sizes must not move after burn-in"),
            }
            states.push(state.theta.clone());
            trace.push(lp);
        }
    }
    Ok(McmcChain {
        j: post.basis.degree(),
        d: post.basis.dim(),
        seed: config.seed,
        states,
        log_posterior_trace: trace,
        acceptance_rate_per_coordinate: kept_acc.iter().map(|a| *a as f64 / keep as f64).collect(),
        step_sizes: log_step.iter().map(|v| v.exp()).collect(),
        warnings,
    })
}

/// Univariate effective sample size with Geyer's initial monotone positive
/// sequence. A constant trace has ESS 1; the result never exceeds `n`.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return n as f64;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 <= 0.0 || !c0.is_finite() {
        return 1.0;
    }
    let rho = |lag: usize| -> f64 {
        dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = rho(2 * k) + rho(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

impl McmcChain {
    pub fn basis(&self) -> Result<Arc<BernsteinBasis>> {
        BernsteinBasis::new(self.j, self.d)
    }

    pub fn ess_per_coordinate(&self) -> Vec<f64> {
        let n = self.states.first().map_or(0, Vec::len);
        (0..n)
            .into_par_iter()
            .map(|b| effective_sample_size(&self.states.iter().map(|s| s[b]).collect::<Vec<_>>()))
            .collect()
    }

    /// Indices of `thin` states evenly spread over the chain (all when fewer).
    pub fn thinned_indices(&self, thin: usize) -> Vec<usize> {
        let n = self.states.len();
        if thin == 0 || n == 0 {
            return Vec::new();
        }
        if thin >= n {
            return (0..n).collect();
        }
        (0..thin).map(|i| i * (n - 1) / (thin - 1).max(1)).collect()
    }

    pub fn density_at(&self, basis: &Arc<BernsteinBasis>, index: usize) -> Result<BernsteinAngularDensity> {
        BernsteinAngularDensity::from_logits(basis.clone(), &self.states[index]).map_err(|e| Error::State {
            state: index,
            source: Box::new(e),
        })
    }

    /// Density whose weights are the average of the states' weights. The
    /// constraints are linear, so the average satisfies them too.
    pub fn posterior_mean_density(&self) -> Result<BernsteinAngularDensity> {
        let basis = self.basis()?;
        if self.states.is_empty() {
            return Err(Error::domain("chain has no states"));
        }
        let mut mean = vec![0.0; basis.len()];
        for (i, s) in self.states.iter().enumerate() {
            let w = basis.weights(s).map_err(|e| Error::State {
                state: i,
                source: Box::new(e),
            })?;
            mean.iter_mut().zip(w).for_each(|(m, v)| *m += v);
        }
        let n = self.states.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        BernsteinAngularDensity::from_weights(basis, mean)
    }

    /// One JSON object per kept state: `{iter, logits, log_post}`. `iter`
    /// counts from the start of the run, burn-in included.
    pub fn write_jsonl(&self, path: &Path, burn_in: usize) -> Result<()> {
        let mut buf = Vec::new();
        for (i, (s, lp)) in self.states.iter().zip(&self.log_posterior_trace).enumerate() {
            let rec = ChainRecord {
                iter: burn_in + i,
                logits: s.clone(),
                log_post: *lp,
            };
            serde_json::to_writer(&mut buf, &rec)?;
            buf.write_all(b"\n")?;
        }
        write_atomic(path, &buf)
    }

    /// Rebuilds a chain from its JSON-lines states and its summary.
    pub fn read_jsonl(path: &Path, summary: &ChainSummary) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut states = Vec::new();
        let mut trace = Vec::new();
        for line in f.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ChainRecord = serde_json::from_str(&line)?;
            states.push(rec.logits);
            trace.push(rec.log_post);
        }
        Ok(Self {
            j: summary.j,
            d: summary.d,
            seed: summary.seed,
            states,
            log_posterior_trace: trace,
            acceptance_rate_per_coordinate: summary.acceptance_rate_per_coordinate.clone(),
            step_sizes: summary.step_sizes.clone(),
            warnings: summary.warnings.clone(),
        })
    }

    pub fn summary(&self, sample: &PseudoAngleSample, config: &McmcConfig) -> ChainSummary {
        let ess = self.ess_per_coordinate();
        let mut sorted = ess.clone();
        sorted.sort_by(f64::total_cmp);
        let acc = &self.acceptance_rate_per_coordinate;
        ChainSummary {
            j: self.j,
            d: self.d,
            k: sample.k,
            threshold_u: sample.threshold_u,
            radial_quantile: sample.radial_quantile,
            seed: self.seed,
            iterations: config.iterations,
            burn_in: config.burn_in,
            prior_concentration: config.prior_concentration,
            mean_acceptance: if acc.is_empty() { 0.0 } else { acc.iter().sum::<f64>() / acc.len() as f64 },
            acceptance_rate_per_coordinate: acc.clone(),
            ess_per_coordinate: ess,
            min_ess: sorted.first().copied().unwrap_or(0.0),
            median_ess: sorted.get(sorted.len() / 2).copied().unwrap_or(0.0),
            step_sizes: self.step_sizes.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainRecord {
    iter: usize,
    logits: Vec<f64>,
    log_post: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    #[serde(rename = "J")]
    pub j: usize,
    pub d: usize,
    pub k: usize,
    pub threshold_u: f64,
    pub radial_quantile: f64,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_concentration: f64,
    pub mean_acceptance: f64,
    pub acceptance_rate_per_coordinate: Vec<f64>,
    pub ess_per_coordinate: Vec<f64>,
    pub min_ess: f64,
    pub median_ess: f64,
    pub step_sizes: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Mixture over posterior states: `G(y | x)` is the average of the states'
/// conditional CDFs.
pub struct PosteriorLaw {
    densities: Vec<BernsteinAngularDensity>,
}

impl PosteriorLaw {
    pub fn new(densities: Vec<BernsteinAngularDensity>) -> Result<Self> {
        let d = densities.first().map(BernsteinAngularDensity::dim).ok_or_else(|| Error::domain("no posterior states"))?;
        if densities.iter().any(|h| h.dim() != d) {
            return Err(Error::domain("posterior states of different dimensions"));
        }
        Ok(Self { densities })
    }

    /// `thin` evenly spaced states of `chain`.
    pub fn from_chain(chain: &McmcChain, thin: usize) -> Result<Self> {
        let basis = chain.basis()?;
        let densities = chain
            .thinned_indices(thin)
            .into_iter()
            .map(|i| chain.density_at(&basis, i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(densities)
    }

    pub fn states(&self) -> &[BernsteinAngularDensity] {
        &self.densities
    }
}

impl ConditionalLaw for PosteriorLaw {
    fn covariates(&self) -> usize {
        self.densities[0].dim() - 1
    }

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        check_covariates(self.covariates(), x)?;
        let mut s = 0.0;
        for h in &self.densities {
            s += h.conditional_cdf(y, x)?;
        }
        Ok(s / self.densities.len() as f64)
    }

    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        let start = x.iter().copied().fold(f64::INFINITY, f64::min);
        invert_cdf(|y| self.conditional_cdf(y, x), q, start, x)
    }
}

/// Default number of states used for posterior functionals.
pub const DEFAULT_THIN: usize = 200;

/// Pointwise posterior mean and central `credible_level` interval of the
/// regression manifold over `thin` evenly spaced states.
pub fn posterior_manifold(
    chain: &McmcChain,
    q_levels: &[f64],
    x_grid: &[Vec<f64>],
    credible_level: f64,
    thin: usize,
) -> Result<RegressionManifold> {
    if !(credible_level > 0.0 && credible_level < 1.0) {
        return Err(Error::domain(format!("credible level must be in (0, 1), got {credible_level}")));
    }
    let basis = chain.basis()?;
    let idx = chain.thinned_indices(thin);
    if idx.is_empty() {
        return Err(Error::domain("chain has no states"));
    }
    let per_state: Vec<Vec<Vec<f64>>> = idx
        .par_iter()
        .map(|&s| {
            let h = chain.density_at(&basis, s)?;
            q_levels
                .iter()
                .map(|&q| {
                    x_grid
                        .iter()
                        .map(|x| h.conditional_quantile(q, x))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::State {
                    state: s,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_states(&per_state, q_levels, x_grid, credible_level))
}

pub(crate) fn summarize_states(
    per_state: &[Vec<Vec<f64>>],
    q_levels: &[f64],
    x_grid: &[Vec<f64>],
    level: f64,
) -> RegressionManifold {
    let (nq, nx) = (q_levels.len(), x_grid.len());
    let mut values = vec![vec![0.0; nx]; nq];
    let mut lower = values.clone();
    let mut upper = values.clone();
    let lo_p = (1.0 - level) / 2.0;
    for i in 0..nq {
        for j in 0..nx {
            let mut col: Vec<f64> = per_state.iter().map(|s| s[i][j]).collect();
            values[i][j] = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            lower[i][j] = sorted_quantile(&col, lo_p);
            upper[i][j] = sorted_quantile(&col, 1.0 - lo_p);
        }
    }
    RegressionManifold {
        q_levels: q_levels.to_vec(),
        x_grid: x_grid.to_vec(),
        values,
        bands: Some(CredibleBands { level, lower, upper }),
    }
}

fn sorted_quantile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
