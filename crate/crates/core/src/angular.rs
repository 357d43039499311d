//! Bernstein-polynomial angular densities on the unit simplex.
//!
//! A density of degree `J` in dimension `d` is a mixture of Dirichlet
//! densities `dir(w; α)` over the compositions `α` of `J` into `d` positive
//! parts. Weights are parametrized by logits on the non-corner compositions;
//! the `d` corner weights are then fixed by normalization and the mean
//! constraints `Σ_α α_j π_α = J/d`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_sig, write_atomic};
use crate::law::{check_covariates, check_positive, ConditionalLaw};
use crate::quadrature::GaussLegendre;
use crate::roots::invert_cdf;
use crate::special::ln_gamma_pos;

/// Refuse bases larger than this many compositions.
pub const MAX_COMPOSITIONS: usize = 2_000_000;

/// Tolerances for the normalization and mean constraints.
pub const NORM_TOL: f64 = 1e-12;
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompositionIndex {
    pub alpha: Vec<u32>,
}

/// Compositions of `j` into `d` positive parts in lexicographic order.
pub fn enumerate_compositions(j: usize, d: usize) -> Result<Vec<CompositionIndex>> {
    if d < 2 || j < d {
        return Err(Error::domain(format!("need d >= 2 and J >= d, got J = {j}, d = {d}")));
    }
    let count = binomial(j - 1, d - 1);
    if count > MAX_COMPOSITIONS as f64 {
        return Err(Error::domain(format!("C({}, {}) = {count:e} compositions is too many", j - 1, d - 1)));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; d];
    fill(&mut out, &mut cur, 0, j as u32);
    Ok(out)
}

fn fill(out: &mut Vec<CompositionIndex>, cur: &mut [u32], pos: usize, rest: u32) {
    let d = cur.len();
    if pos == d - 1 {
        cur[pos] = rest;
        out.push(CompositionIndex { alpha: cur.to_vec() });
        return;
    }
    let slots_after = (d - 1 - pos) as u32;
    for v in 1..=(rest - slots_after) {
        cur[pos] = v;
        fill(out, cur, pos + 1, rest - v);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_gamma_pos(n as f64 + 1.0) - ln_gamma_pos(k as f64 + 1.0) - ln_gamma_pos((n - k) as f64 + 1.0))
        .exp()
        .round()
}

/// The composition set of one `(J, d)` with the quantities every density
/// over it needs. Shared between densities through an `Arc`.
#[derive(Debug)]
pub struct BernsteinBasis {
    j: usize,
    d: usize,
    compositions: Vec<CompositionIndex>,
    /// `corners[k]` is the position of `a_k`, whose component `k` is `J - d + 1`.
    corners: Vec<usize>,
    free: Vec<usize>,
    /// `ln B_α = Σ ln Γ(α_i) - ln Γ(J)`.
    log_beta: Vec<f64>,
    ln_factorial: Vec<f64>,
}

impl BernsteinBasis {
    pub fn new(j: usize, d: usize) -> Result<Arc<Self>> {
        let compositions = enumerate_compositions(j, d)?;
        let big = (j - d + 1) as u32;
        let corners: Vec<usize> = if j == d {
            vec![0]
        } else {
            (0..d)
                .map(|k| {
                    compositions
                        .iter()
                        .position(|c| c.alpha.iter().enumerate().all(|(i, &a)| a == if i == k { big } else { 1 }))
                        .expect("corner composition exists")
                })
                .collect()
        };
        let free = (0..compositions.len()).filter(|i| !corners.contains(i)).collect();
        let ln_gamma_j = ln_gamma_pos(j as f64);
        let log_beta = compositions
            .iter()
            .map(|c| c.alpha.iter().map(|&a| ln_gamma_pos(a as f64)).sum::<f64>() - ln_gamma_j)
            .collect();
        let ln_factorial = (0..=j).map(|k| ln_gamma_pos(k as f64 + 1.0)).collect();
        Ok(Arc::new(Self {
            j,
            d,
            compositions,
            corners,
            free,
            log_beta,
            ln_factorial,
        }))
    }

    pub fn degree(&self) -> usize {
        self.j
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `m = C(J-1, d-1)`.
    pub fn len(&self) -> usize {
        self.compositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compositions.is_empty()
    }

    /// Number of free logits, `m - d` (zero when `J = d`).
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn compositions(&self) -> &[CompositionIndex] {
        &self.compositions
    }

    pub fn corner_indices(&self) -> &[usize] {
        &self.corners
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free
    }

    /// Full weight vector from free logits. The free weights are
    /// `e^θ / (d + Σ e^θ)`; corner weights solve the constraints.
    pub fn weights(&self, logits: &[f64]) -> Result<Vec<f64>> {
        self.weights_and_log_z(logits).map(|(w, _)| w)
    }

    /// [`BernsteinBasis::weights`] and `ln Z` with `Z = d + Σ e^θ`.
    pub(crate) fn weights_and_log_z(&self, logits: &[f64]) -> Result<(Vec<f64>, f64)> {
        if logits.len() != self.free.len() {
            return Err(Error::domain(format!(
                "expected {} free logits for J = {}, d = {}, got {}",
                self.free.len(),
                self.j,
                self.d,
                logits.len()
            )));
        }
        if self.j == self.d {
            return Ok((vec![1.0], (self.d as f64).ln()));
        }
        if let Some(v) = logits.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite logit {v}")));
        }
        let shift = logits.iter().copied().fold(0.0f64, f64::max);
        let e: Vec<f64> = logits.iter().map(|t| (t - shift).exp()).collect();
        let z = self.d as f64 * (-shift).exp() + e.iter().sum::<f64>();
        let mut w = vec![0.0; self.len()];
        let mut t = vec![0.0; self.d];
        for (&idx, ei) in self.free.iter().zip(&e) {
            let p = ei / z;
            w[idx] = p;
            for (tk, &a) in t.iter_mut().zip(&self.compositions[idx].alpha) {
                *tk += a as f64 * p;
            }
        }
        let corners = self.solve_corners(&t)?;
        for (k, c) in corners.into_iter().enumerate() {
            w[self.corners[k]] = c;
        }
        Ok((w, shift + z.ln()))
    }

    /// Corner weights given `t_k = Σ_free α_k π_α`.
    ///
    /// Corner `a_k` contributes `c_k (J - d) + Σc` to margin `k`, so with
    /// `b_k = J/d - t_k` the system gives `Σc = Σb / J` and
    /// `c_k = (b_k - Σc) / (J - d)`.
    pub(crate) fn solve_corners(&self, t: &[f64]) -> Result<Vec<f64>> {
        let jf = self.j as f64;
        let b: Vec<f64> = t.iter().map(|tk| jf / self.d as f64 - tk).collect();
        let sum_c = b.iter().sum::<f64>() / jf;
        let denom = (self.j - self.d) as f64;
        let c: Vec<f64> = b.iter().map(|bk| (bk - sum_c) / denom).collect();
        for (k, v) in c.iter().enumerate() {
            if *v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidWeights {
                    index: self.corners[k],
                    value: *v,
                });
            }
        }
        Ok(c)
    }

    /// `dir(w; α)` for every composition, in basis order.
    pub fn dirichlet_terms(&self, w: &[f64]) -> Result<Vec<f64>> {
        let ln_w = self.check_point(w)?;
        Ok((0..self.len()).map(|i| self.ln_dirichlet(i, &ln_w).exp()).collect())
    }

    fn check_point(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.d {
            return Err(Error::domain(format!("expected a point of dimension {}, got {}", self.d, w.len())));
        }
        if let Some(v) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("simplex point has component {v}")));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("simplex point sums to {s}")));
        }
        Ok(w.iter().map(|v| v.ln()).collect())
    }

    // Boundary convention: a zero coordinate with α_i = 1 contributes the
    // factor 1, with α_i > 1 it sends the term to 0.
    fn ln_dirichlet(&self, i: usize, ln_w: &[f64]) -> f64 {
        let mut s = -self.log_beta[i];
        for (&a, lw) in self.compositions[i].alpha.iter().zip(ln_w) {
            if a > 1 {
                s += (a - 1) as f64 * lw;
            }
        }
        s
    }

    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.ln_factorial[n] - self.ln_factorial[k] - self.ln_factorial[n - k]
    }
}

/// Bernstein angular density: basis plus a weight vector satisfying the
/// normalization and mean constraints.
#[derive(Debug, Clone)]
pub struct BernsteinAngularDensity {
    basis: Arc<BernsteinBasis>,
    weights: Vec<f64>,
    free_logits: Vec<f64>,
}

/// Builds the density for `free_logits` on a fresh `(J, d)` basis.
pub fn weights_from_logits(free_logits: &[f64], j: usize, d: usize) -> Result<BernsteinAngularDensity> {
    BernsteinAngularDensity::from_logits(BernsteinBasis::new(j, d)?, free_logits)
}

/// Orders and tolerance of the Gauss–Legendre doubling used by
/// [`BernsteinAngularDensity::conditional_cdf_approx`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub initial_order: usize,
    pub max_order: usize,
    pub rel_tol: f64,
    /// Fitted radial threshold; evaluations with `‖(x, y)‖₁` below it log a warning.
    pub threshold: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            initial_order: 64,
            max_order: 1024,
            rel_tol: 1e-8,
            threshold: None,
        }
    }
}

impl BernsteinAngularDensity {
    pub fn from_logits(basis: Arc<BernsteinBasis>, free_logits: &[f64]) -> Result<Self> {
        let weights = basis.weights(free_logits)?;
        Ok(Self {
            basis,
            weights,
            free_logits: free_logits.to_vec(),
        })
    }

    /// Density with explicit weights. Checked against the constraints; the
    /// logits are recovered from the free weights.
    pub fn from_weights(basis: Arc<BernsteinBasis>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::domain(format!("expected {} weights, got {}", basis.len(), weights.len())));
        }
        if let Some((index, value)) = weights.iter().copied().enumerate().find(|(_, v)| !(*v >= 0.0)) {
            return Err(Error::InvalidWeights { index, value });
        }
        let corner_sum: f64 = basis.corners.iter().map(|&i| weights[i]).sum();
        let d = basis.d as f64;
        let free_logits = basis
            .free
            .iter()
            .map(|&i| (weights[i] * d / corner_sum).ln())
            .collect();
        let h = Self {
            basis,
            weights,
            free_logits,
        };
        let (norm, mean) = h.constraint_errors();
        if norm > 1e-9 || mean > 1e-9 {
            return Err(Error::domain(format!(
                "weights violate the constraints (normalization {norm:e}, mean {mean:e})"
            )));
        }
        Ok(h)
    }

    /// The density with every weight on the single composition `(1, …, 1)`
    /// when `J = d`; for `d = 2` this is the uniform density on `(0, 1)`.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::from_logits(BernsteinBasis::new(d, d)?, &[])
    }

    pub fn basis(&self) -> &Arc<BernsteinBasis> {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.j
    }

    pub fn dim(&self) -> usize {
        self.basis.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn free_logits(&self) -> &[f64] {
        &self.free_logits
    }

    pub fn compositions(&self) -> &[CompositionIndex] {
        &self.basis.compositions
    }

    pub fn corner_indices(&self) -> &[usize] {
        &self.basis.corners
    }

    /// `(|Σπ - 1|, max_j |Σ_α α_j π_α - J/d|)`.
    pub fn constraint_errors(&self) -> (f64, f64) {
        let norm = (self.weights.iter().sum::<f64>() - 1.0).abs();
        let target = self.basis.j as f64 / self.basis.d as f64;
        let mean = (0..self.basis.d)
            .map(|k| {
                let s: f64 = self
                    .basis
                    .compositions
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, p)| c.alpha[k] as f64 * p)
                    .sum();
                (s - target).abs()
            })
            .fold(0.0, f64::max);
        (norm, mean)
    }

    pub fn check_constraints(&self) -> Result<()> {
        let (norm, mean) = self.constraint_errors();
        if norm > NORM_TOL || mean > MEAN_TOL {
            return Err(Error::domain(format!(
                "constraints violated: normalization {norm:e}, mean {mean:e}"
            )));
        }
        Ok(())
    }

    /// `h(w) = Σ π_α dir(w; α)`. Points on the boundary of the simplex are
    /// evaluated by the analytic limit: a zero coordinate keeps terms with
    /// `α_i = 1` and drops those with `α_i > 1`.
    pub fn density(&self, w: &[f64]) -> Result<f64> {
        let ln_w = self.basis.check_point(w)?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| p * self.basis.ln_dirichlet(i, &ln_w).exp())
            .sum())
    }

    /// Exact conditional CDF of `Y` given `X = x` for `d = 2`.
    ///
    /// With `ω = x/(x+y)` and `B ~ Bin(J, ω)`,
    /// `G = (2/J) Σ π_α α₁ P(B ≤ α₁) · exp{(2/J) Σ π_α [α₁ P(B > α₁)/x - α₂ P(B ≥ α₁)/y]}`.
    /// The first coordinate of the simplex belongs to `x`.
    pub fn conditional_cdf_p1(&self, y: f64, x: f64) -> Result<f64> {
        if self.basis.d != 2 {
            return Err(Error::domain(format!("conditional_cdf_p1 needs d = 2, got d = {}", self.basis.d)));
        }
        check_positive("y", y)?;
        check_positive("x", x)?;
        if y.is_infinite() {
            return Ok(1.0);
        }
        let j = self.basis.j;
        let ln_xy = (x + y).ln();
        let (ln_om, ln_om_c) = (x.ln() - ln_xy, y.ln() - ln_xy);
        let pmf: Vec<f64> = (0..=j)
            .map(|k| {
                let a = if k == 0 { 0.0 } else { k as f64 * ln_om };
                let b = if k == j { 0.0 } else { (j - k) as f64 * ln_om_c };
                (self.basis.ln_choose(j, k) + a + b).exp()
            })
            .collect();
        // lower[k] = P(B <= k), upper[k] = P(B >= k); both summed from their own tail.
        let mut lower = vec![0.0; j + 2];
        let mut acc = 0.0;
        for k in 0..=j {
            acc += pmf[k];
            lower[k] = acc;
        }
        let mut upper = vec![0.0; j + 2];
        acc = 0.0;
        for k in (0..=j).rev() {
            acc += pmf[k];
            upper[k] = acc;
        }
        let (mut lead, mut expo) = (0.0, 0.0);
        for (c, p) in self.basis.compositions.iter().zip(&self.weights) {
            let (a1, a2) = (c.alpha[0] as usize, c.alpha[1] as f64);
            lead += p * a1 as f64 * lower[a1].min(1.0);
            expo += p * (a1 as f64 * upper[a1 + 1] / x - a2 * upper[a1] / y);
        }
        let jf = j as f64;
        let g = 2.0 / jf * lead * (2.0 / jf * expo).exp();
        Ok(g.clamp(0.0, 1.0))
    }

    /// Point-process approximation of the conditional CDF of the last
    /// coordinate given `x = (x_1, …, x_p)`, `p = d - 1 >= 1`:
    /// the ratio of `Σ π_α/B_α Π x_i^{α_i-1} ∫₀^y t^{α_d-1} (‖x‖₁ + t)^{-J-1} dt`
    /// to the same sum with the integral over `(0, ∞)`.
    pub fn conditional_cdf_approx(&self, y: f64, x: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
        check_positive("y", y)?;
        ApproxConditional::new(self, x, cfg)?.cdf(y)
    }

    pub fn to_json_value(&self) -> DensityFile {
        DensityFile {
            j: self.basis.j,
            d: self.basis.d,
            compositions: self.basis.compositions.clone(),
            weights: self.weights.clone(),
            free_logits: Some(self.free_logits.clone()),
        }
    }

    /// JSON `{J, d, compositions, weights, free_logits}` in basis order.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_json_value())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f: DensityFile = crate::io::read_json(path)?;
        Self::try_from(f)
    }
}

/// Serialized form of a [`BernsteinAngularDensity`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityFile {
    #[serde(rename = "J")]
    pub j: usize,
    pub d: usize,
    pub compositions: Vec<CompositionIndex>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_logits: Option<Vec<f64>>,
}

impl TryFrom<DensityFile> for BernsteinAngularDensity {
    type Error = Error;

    fn try_from(f: DensityFile) -> Result<Self> {
        let basis = BernsteinBasis::new(f.j, f.d)?;
        if f.compositions != basis.compositions {
            return Err(Error::Data("composition list is not in canonical order".into()));
        }
        match f.free_logits {
            Some(l) => {
                let h = Self::from_logits(basis, &l)?;
                let diff = h.weights.iter().zip(&f.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if diff > 1e-9 {
                    return Err(Error::Data(format!("stored weights disagree with logits by {diff:e}")));
                }
                Ok(h)
            }
            None => Self::from_weights(basis, f.weights),
        }
    }
}

/// [`BernsteinAngularDensity::conditional_cdf_approx`] with everything that
/// depends only on `x` computed once.
pub struct ApproxConditional {
    j: usize,
    sum_x: f64,
    /// Indexed by `α_d - 1`: log of the summed `π_α/B_α Π x_i^{α_i-1}`
    /// times `‖x‖₁^{α_d-J-1}`, or `-inf` when no weight uses that `α_d`.
    ln_coef: Vec<f64>,
    ln_den: f64,
    cfg: QuadratureConfig,
}

impl ApproxConditional {
    pub fn new(h: &BernsteinAngularDensity, x: &[f64], cfg: &QuadratureConfig) -> Result<Self> {
        let d = h.basis.d;
        check_covariates(d - 1, x)?;
        if cfg.initial_order == 0 || cfg.max_order < cfg.initial_order || !(cfg.rel_tol > 0.0) {
            return Err(Error::domain("invalid quadrature configuration"));
        }
        let j = h.basis.j;
        let sum_x: f64 = x.iter().sum();
        let ln_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let n_a = j - d + 1;
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_a];
        for (i, (c, p)) in h.basis.compositions.iter().zip(&h.weights).enumerate() {
            if *p <= 0.0 {
                continue;
            }
            let mut v = p.ln() - h.basis.log_beta[i];
            for (&a, lx) in c.alpha[..d - 1].iter().zip(&ln_x) {
                v += (a - 1) as f64 * lx;
            }
            buckets[c.alpha[d - 1] as usize - 1].push(v);
        }
        let ln_s = sum_x.ln();
        let ln_coef = buckets
            .iter()
            .enumerate()
            .map(|(k, b)| log_sum_exp(b) + (k as f64 + 1.0 - j as f64 - 1.0) * ln_s)
            .collect();
        let mut me = Self {
            j,
            sum_x,
            ln_coef,
            ln_den: 0.0,
            cfg: *cfg,
        };
        me.ln_den = me.ln_weighted_integral(1.0)?;
        Ok(me)
    }

    /// `G(y | x)`.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        if let Some(u) = self.cfg.threshold {
            if self.sum_x + y < u {
                log::debug!("approximate conditional CDF evaluated below the threshold ({} < {u})", self.sum_x + y);
            }
        }
        if y.is_infinite() {
            return Ok(1.0);
        }
        let upper = y / (y + self.sum_x);
        let ln_num = self.ln_weighted_integral(upper)?;
        Ok((ln_num - self.ln_den).exp().clamp(0.0, 1.0))
    }

    // ln Σ_a C_a ∫₀^upper s^{a-1} (1-s)^{J-a} ds, after t = ‖x‖₁ s/(1-s);
    // Gauss–Legendre order doubled until the relative change is below rel_tol.
    fn ln_weighted_integral(&self, upper: f64) -> Result<f64> {
        if upper <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let mut n = self.cfg.initial_order;
        let mut prev = self.ln_weighted_integral_at(n, upper);
        loop {
            let next_n = n * 2;
            if next_n > self.cfg.max_order {
                let cur = self.ln_weighted_integral_at(n, upper);
                return Err(Error::Quadrature {
                    order: n,
                    rel_change: (cur - prev).exp_m1().abs(),
                });
            }
            let next = self.ln_weighted_integral_at(next_n, upper);
            let change = if prev == next { 0.0 } else { (next - prev).exp_m1().abs() };
            if change < self.cfg.rel_tol {
                return Ok(next);
            }
            prev = next;
            n = next_n;
        }
    }

    fn ln_weighted_integral_at(&self, order: usize, upper: f64) -> f64 {
        let gl = GaussLegendre::cached(order);
        let nodes: Vec<(f64, f64, f64)> = gl
            .mapped(0.0, upper)
            .map(|(s, w)| (w.ln(), s.ln(), (-s).ln_1p()))
            .collect();
        let jf = self.j as f64;
        let terms: Vec<f64> = self
            .ln_coef
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .map(|(k, c)| {
                let a = k as f64 + 1.0;
                let per_node: Vec<f64> = nodes
                    .iter()
                    .map(|(lw, ls, l1s)| lw + (a - 1.0) * ls + (jf - a) * l1s)
                    .collect();
                c + log_sum_exp(&per_node)
            })
            .collect();
        log_sum_exp(&terms)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl ConditionalLaw for BernsteinAngularDensity {
    fn covariates(&self) -> usize {
        self.basis.d - 1
    }

    fn conditional_cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        check_covariates(self.basis.d - 1, x)?;
        if self.basis.d == 2 {
            self.conditional_cdf_p1(y, x[0])
        } else {
            self.conditional_cdf_approx(y, x, &QuadratureConfig::default())
        }
    }

    fn conditional_quantile(&self, q: f64, x: &[f64]) -> Result<f64> {
        check_covariates(self.basis.d - 1, x)?;
        let start = x.iter().copied().fold(f64::INFINITY, f64::min);
        if self.basis.d == 2 {
            invert_cdf(|y| self.conditional_cdf_p1(y, x[0]), q, start, x)
        } else {
            let approx = ApproxConditional::new(self, x, &QuadratureConfig::default())?;
            invert_cdf(|y| approx.cdf(y), q, start, x)
        }
    }
}

/// Exceedances of a pseudo-polar decomposition: `R = ‖v‖₁`, `w = v / R`,
/// kept where `R` is above the empirical `radial_quantile` of all radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoAngleSample {
    pub angles: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Row of each exceedance in the decomposed data.
    pub indices: Vec<usize>,
    pub threshold_u: f64,
    pub radial_quantile: f64,
    pub k: usize,
    pub d: usize,
}

/// Pseudo-polar decomposition of Fréchet-scale rows `(x_1, …, x_p, y)`.
/// The threshold is the type-7 empirical quantile of the radii; rows with
/// radius strictly above it are kept.
pub fn decompose(data: &[Vec<f64>], radial_quantile: f64) -> Result<PseudoAngleSample> {
    if !(radial_quantile > 0.0 && radial_quantile < 1.0) {
        return Err(Error::domain(format!("radial quantile must be in (0, 1), got {radial_quantile}")));
    }
    let d = data.first().map_or(0, Vec::len);
    if d < 2 {
        return Err(Error::domain("decomposition needs rows of dimension >= 2"));
    }
    let mut radii_all = Vec::with_capacity(data.len());
    for (i, row) in data.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Data(format!("row {i} has {} columns, expected {d}", row.len())));
        }
        if let Some(v) = row.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("row {i} has non-positive or non-finite value {v}")));
        }
        radii_all.push(row.iter().sum::<f64>());
    }
    let u = empirical_quantile(&radii_all, radial_quantile);
    let mut out = PseudoAngleSample {
        angles: Vec::new(),
        radii: Vec::new(),
        indices: Vec::new(),
        threshold_u: u,
        radial_quantile,
        k: 0,
        d,
    };
    for (i, (row, r)) in data.iter().zip(&radii_all).enumerate() {
        if *r > u {
            out.angles.push(row.iter().map(|v| v / r).collect());
            out.radii.push(*r);
            out.indices.push(i);
        }
    }
    out.k = out.radii.len();
    if out.k < d + 1 {
        return Err(Error::InsufficientExceedances { k: out.k, required: d + 1 });
    }
    Ok(out)
}

/// Type-7 (linear interpolation) sample quantile.
pub fn empirical_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

impl PseudoAngleSample {
    /// Sample with no exceedances, for prior-only runs.
    pub fn empty(d: usize) -> Self {
        Self {
            angles: Vec::new(),
            radii: Vec::new(),
            indices: Vec::new(),
            threshold_u: f64::INFINITY,
            radial_quantile: 1.0,
            k: 0,
            d,
        }
    }

    /// Sample made of given simplex points, with unit radii.
    pub fn from_angles(angles: Vec<Vec<f64>>) -> Result<Self> {
        let d = angles.first().map_or(2, Vec::len);
        for w in &angles {
            if w.len() != d || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 || w.iter().any(|v| *v < 0.0) {
                return Err(Error::domain("angles must be points of one simplex"));
            }
        }
        let k = angles.len();
        Ok(Self {
            radii: vec![1.0; k],
            indices: (0..k).collect(),
            angles,
            threshold_u: 0.0,
            radial_quantile: f64::NAN,
            k,
            d,
        })
    }

    /// CSV `r,w_1,…,w_d` after a `#` comment line recording `u` and the
    /// radial quantile.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut s = format!(
            "# u={} radial_quantile={} k={}\n",
            fmt_sig(self.threshold_u),
            fmt_sig(self.radial_quantile),
            self.k
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["r".to_string()];
        header.extend((1..=self.d).map(|i| format!("w_{i}")));
        w.write_record(&header)?;
        for (r, a) in self.radii.iter().zip(&self.angles) {
            let mut rec = vec![fmt_sig(*r)];
            rec.extend(a.iter().map(|v| fmt_sig(*v)));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        s.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }
}
