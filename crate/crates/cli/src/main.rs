//! `bmreg`: block-maxima regression from price series to predicted tail
//! quantiles.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use bmreg_core::Degree;
use clap::{Args, Parser, Subcommand};

use crate::config::{
    BlockRule, FitConfig, ManifoldConfig, PredictConfig, ResidualsConfig, RunConfig, SimulateConfig,
    TransformConfig,
};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bmreg", version, about = "Regression of block maxima on block maxima")]
struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed, split per component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the resolved configuration as JSON before running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate Fréchet-scale pairs from a parametric model.
    Simulate(SimulateArgs),
    /// Weekly maxima of two price series on unit Fréchet margins.
    Transform(TransformArgs),
    /// Fit a Bernstein angular density by adaptive MCMC.
    Fit(FitArgs),
    /// Regression manifold of a fit or a parametric model.
    Manifold(ManifoldArgs),
    /// Predicted response quantiles on the original scale.
    Predict(PredictArgs),
    /// Quantile residuals of a fit.
    Residuals(ResidualsArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Transform(_) => "transform",
            Command::Fit(_) => "fit",
            Command::Manifold(_) => "manifold",
            Command::Predict(_) => "predict",
            Command::Residuals(_) => "residuals",
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Preset 1, 2 or 3.
    #[arg(long)]
    scenario: Option<u8>,
    /// `logistic:A`, `husler-reiss:L` or `coles-tawn:A,B`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Price CSV of the covariate.
    #[arg(long)]
    x: Option<PathBuf>,
    /// Price CSV of the response.
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    x_label: Option<String>,
    #[arg(long)]
    y_label: Option<String>,
    #[arg(long, value_enum)]
    block: Option<BlockRule>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Fréchet-pair CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    radial_quantile: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    prior_concentration: Option<f64>,
    /// `auto` or an integer.
    #[arg(long, value_parser = parse_degree)]
    degree: Option<Degree>,
    #[arg(long)]
    target_accept: Option<f64>,
    #[arg(long)]
    adapt_window: Option<usize>,
    #[arg(long)]
    initial_step: Option<f64>,
}

#[derive(Debug, Args)]
struct ManifoldArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<u8>,
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated quantile levels.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long)]
    x_min: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long)]
    x_points: Option<usize>,
    #[arg(long)]
    credible_level: Option<f64>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Sidecar JSON written by `transform`.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Comma-separated covariate values on the original scale.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    #[arg(long)]
    credible_level: Option<f64>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Debug, Args)]
struct ResidualsArgs {
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Fréchet-pair CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Radial threshold; defaults to the fit's.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    thin: Option<usize>,
}

fn parse_degree(s: &str) -> Result<Degree, String> {
    s.parse().map_err(|e: bmreg_core::Error| e.to_string())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn resolve(cli: Cli) -> CliResult<(RunConfig, &'static str)> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out);
    let name = cli.command.name();
    match cli.command {
        Command::Simulate(a) => {
            let s = cfg.simulate.get_or_insert_with(SimulateConfig::default);
            if a.scenario.is_some() || a.model.is_some() {
                s.scenario = a.scenario;
                s.model = a.model;
            }
            set(&mut s.n, a.n);
            s.validate()?;
        }
        Command::Transform(a) => {
            let t = cfg.transform.get_or_insert_with(TransformConfig::default);
            set(&mut t.x, a.x.map(Some));
            set(&mut t.y, a.y.map(Some));
            set(&mut t.x_label, a.x_label.map(Some));
            set(&mut t.y_label, a.y_label.map(Some));
            set(&mut t.block, a.block);
            t.validate()?;
        }
        Command::Fit(a) => {
            let f = cfg.fit.get_or_insert_with(FitConfig::default);
            set(&mut f.data, a.data.map(Some));
            set(&mut f.radial_quantile, a.radial_quantile);
            set(&mut f.iterations, a.iterations);
            set(&mut f.burn_in, a.burn_in);
            set(&mut f.prior_concentration, a.prior_concentration);
            set(&mut f.degree, a.degree);
            set(&mut f.target_accept, a.target_accept);
            set(&mut f.adapt_window, a.adapt_window);
            set(&mut f.initial_step, a.initial_step);
            f.validate()?;
        }
        Command::Manifold(a) => {
            let m = cfg.manifold.get_or_insert_with(ManifoldConfig::default);
            if a.fit.is_some() || a.scenario.is_some() || a.model.is_some() {
                m.fit = a.fit;
                m.scenario = a.scenario;
                m.model = a.model;
            }
            set(&mut m.q, a.q);
            set(&mut m.x_min, a.x_min);
            set(&mut m.x_max, a.x_max);
            set(&mut m.x_points, a.x_points);
            set(&mut m.credible_level, a.credible_level);
            set(&mut m.thin, a.thin);
            m.validate()?;
        }
        Command::Predict(a) => {
            let p = cfg.predict.get_or_insert_with(PredictConfig::default);
            set(&mut p.fit, a.fit.map(Some));
            set(&mut p.transform, a.transform.map(Some));
            set(&mut p.x, a.x);
            set(&mut p.q, a.q);
            set(&mut p.credible_level, a.credible_level);
            set(&mut p.thin, a.thin);
            p.validate()?;
        }
        Command::Residuals(a) => {
            let r = cfg.residuals.get_or_insert_with(ResidualsConfig::default);
            set(&mut r.fit, a.fit.map(Some));
            set(&mut r.data, a.data.map(Some));
            set(&mut r.threshold, a.threshold.map(Some));
            set(&mut r.thin, a.thin);
            r.validate()?;
        }
    }
    Ok((cfg.only(name), name))
}

fn run(cli: Cli) -> CliResult<()> {
    let print = cli.print_config;
    let (cfg, name) = resolve(cli)?;
    if print {
        let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        println!("{text}");
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Data(format!("{}: {e}", cfg.out.display())))?;
    match name {
        "simulate" => commands::simulate(&cfg),
        "transform" => commands::transform(&cfg),
        "fit" => commands::fit(&cfg),
        "manifold" => commands::manifold(&cfg),
        "predict" => commands::predict(&cfg),
        "residuals" => commands::residuals(&cfg),
        _ => unreachable!("every command resolves to a known name"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
