//! Run configuration: one JSON file with a section per command. Flags
//! override the file; the result is validated before anything runs.

use std::path::{Path, PathBuf};

use bmreg_core::manifold::default_q_levels;
use bmreg_core::mcmc::DEFAULT_THIN;
use bmreg_core::{Degree, EvModel, McmcConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualsConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("."),
            simulate: None,
            transform: None,
            fit: None,
            manifold: None,
            predict: None,
            residuals: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Keeps only the section of the command being run.
    pub fn only(&self, command: &str) -> Self {
        let mut c = Self {
            seed: self.seed,
            out: self.out.clone(),
            ..Self::default()
        };
        match command {
            "simulate" => c.simulate = self.simulate.clone(),
            "transform" => c.transform = self.transform.clone(),
            "fit" => c.fit = self.fit.clone(),
            "manifold" => c.manifold = self.manifold.clone(),
            "predict" => c.predict = self.predict.clone(),
            "residuals" => c.residuals = self.residuals.clone(),
            _ => {}
        }
        c
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require<'a, T>(v: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| usage(format!("missing required setting `{name}`")))
}

fn check_levels(q: &[f64], name: &str) -> CliResult<()> {
    if q.is_empty() {
        return Err(usage(format!("`{name}` is empty")));
    }
    if let Some(v) = q.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(usage(format!("`{name}` values must be in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_level(v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("credible_level must be in (0, 1), got {v}")))
    }
}

/// A model given either as a scenario number or as a spec string.
fn resolve_model(scenario: Option<u8>, model: &Option<String>) -> CliResult<Option<EvModel>> {
    match (scenario, model) {
        (Some(_), Some(_)) => Err(usage("give either a scenario or a model, not both")),
        (Some(s), None) => Ok(Some(EvModel::scenario(s)?)),
        (None, Some(m)) => Ok(Some(m.parse()?)),
        (None, None) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: Option<u8>,
    /// `logistic:A`, `husler-reiss:L` or `coles-tawn:A,B`.
    pub model: Option<String>,
    pub n: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            model: None,
            n: 5000,
        }
    }
}

impl SimulateConfig {
    pub fn model(&self) -> CliResult<EvModel> {
        resolve_model(self.scenario, &self.model)?.ok_or_else(|| usage("simulate needs --scenario or --model"))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model()?;
        if self.n == 0 {
            return Err(usage("n must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BlockRule {
    #[default]
    Weekly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Price CSV of the covariate series.
    pub x: Option<PathBuf>,
    /// Price CSV of the response series.
    pub y: Option<PathBuf>,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
    pub block: BlockRule,
}

impl TransformConfig {
    pub fn validate(&self) -> CliResult<()> {
        require(&self.x, "x")?;
        require(&self.y, "y")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Fréchet-pair CSV.
    pub data: Option<PathBuf>,
    pub radial_quantile: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub prior_concentration: f64,
    pub degree: Degree,
    pub target_accept: f64,
    pub adapt_window: usize,
    pub initial_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let m = McmcConfig::default();
        Self {
            data: None,
            radial_quantile: 0.95,
            iterations: m.iterations,
            burn_in: m.burn_in,
            prior_concentration: m.prior_concentration,
            degree: m.degree,
            target_accept: m.target_accept,
            adapt_window: m.adapt_window,
            initial_step: m.initial_step,
        }
    }
}

impl FitConfig {
    pub fn mcmc(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            prior_concentration: self.prior_concentration,
            degree: self.degree,
            seed,
            target_accept: self.target_accept,
            adapt_window: self.adapt_window,
            initial_step: self.initial_step,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        require(&self.data, "data")?;
        if !(self.radial_quantile > 0.0 && self.radial_quantile < 1.0) {
            return Err(usage(format!("radial_quantile must be in (0, 1), got {}", self.radial_quantile)));
        }
        self.mcmc(0).validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldConfig {
    /// Directory written by `fit`.
    pub fit: Option<PathBuf>,
    pub scenario: Option<u8>,
    pub model: Option<String>,
    pub q: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub credible_level: f64,
    pub thin: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            fit: None,
            scenario: None,
            model: None,
            q: default_q_levels(),
            x_min: 0.1,
            x_max: 20.0,
            x_points: 100,
            credible_level: 0.95,
            thin: DEFAULT_THIN,
        }
    }
}

impl ManifoldConfig {
    pub fn model(&self) -> CliResult<Option<EvModel>> {
        resolve_model(self.scenario, &self.model)
    }

    pub fn validate(&self) -> CliResult<()> {
        match (self.fit.is_some(), self.model()?.is_some()) {
            (true, true) => return Err(usage("give either a fit directory or a model, not both")),
            (false, false) => return Err(usage("manifold needs --fit, --scenario or --model")),
            _ => {}
        }
        check_levels(&self.q, "q")?;
        if !(self.x_min > 0.0 && self.x_max >= self.x_min && self.x_max.is_finite()) {
            return Err(usage(format!("need 0 < x_min <= x_max, got {} and {}", self.x_min, self.x_max)));
        }
        if self.x_points == 0 {
            return Err(usage("x_points must be at least 1"));
        }
        if self.thin == 0 {
            return Err(usage("thin must be at least 1"));
        }
        check_level(self.credible_level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub fit: Option<PathBuf>,
    /// Sidecar JSON written by `transform`.
    pub transform: Option<PathBuf>,
    /// Covariate values on the original (loss) scale.
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub credible_level: f64,
    pub thin: usize,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            fit: None,
            transform: None,
            x: Vec::new(),
            q: vec![0.75, 0.9, 0.95],
            credible_level: 0.95,
            thin: DEFAULT_THIN,
        }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> CliResult<()> {
        require(&self.fit, "fit")?;
        require(&self.transform, "transform")?;
        if self.x.is_empty() {
            return Err(usage("predict needs at least one --x value"));
        }
        if let Some(v) = self.x.iter().find(|v| !v.is_finite()) {
            return Err(usage(format!("non-finite covariate value {v}")));
        }
        if self.thin == 0 {
            return Err(usage("thin must be at least 1"));
        }
        check_levels(&self.q, "q")?;
        check_level(self.credible_level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualsConfig {
    pub fit: Option<PathBuf>,
    /// Fréchet-pair CSV.
    pub data: Option<PathBuf>,
    /// Radial threshold; the fit's threshold when absent.
    pub threshold: Option<f64>,
    pub thin: usize,
}

impl Default for ResidualsConfig {
    fn default() -> Self {
        Self {
            fit: None,
            data: None,
            threshold: None,
            thin: DEFAULT_THIN,
        }
    }
}

impl ResidualsConfig {
    pub fn validate(&self) -> CliResult<()> {
        require(&self.fit, "fit")?;
        require(&self.data, "data")?;
        if let Some(u) = self.threshold {
            if !u.is_finite() || u < 0.0 {
                return Err(usage(format!("threshold must be finite and non-negative, got {u}")));
            }
        }
        if self.thin == 0 {
            return Err(usage("thin must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"fit": {"iters": 3}}"#).is_err());
    }

    #[test]
    fn sections_default_when_partial() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 4, "fit": {"degree": 12}}"#).unwrap();
        let f = c.fit.unwrap();
        assert_eq!(f.degree, Degree::Fixed(12));
        assert_eq!(f.iterations, 10_000);
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn scenario_and_model_conflict() {
        let s = SimulateConfig {
            scenario: Some(1),
            model: Some("logistic:0.5".into()),
            n: 10,
        };
        assert!(matches!(s.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_model_is_a_usage_error() {
        let s = SimulateConfig {
            model: Some("logistic:1.5".into()),
            ..SimulateConfig::default()
        };
        assert!(matches!(s.validate(), Err(CliError::Usage(_))));
    }
}
