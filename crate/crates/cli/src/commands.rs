use std::fmt::Write as _;
use std::path::Path;

use bmreg_core::angular::decompose;
use bmreg_core::diagnostics::quantile_residuals;
use bmreg_core::io::{fmt_sig, read_json, write_atomic, write_json};
use bmreg_core::manifold::{log_grid, manifold_grid, scalar_grid};
use bmreg_core::mcmc::{posterior_manifold, run_chain, ChainSummary, McmcChain, PosteriorLaw};
use bmreg_core::models::sample;
use bmreg_core::pipeline::{read_pairs_csv, transform_prices, write_pairs_csv, PriceSeries, TransformSidecar};
use bmreg_core::seed::derive_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const PAIRS: &str = "pairs.csv";
pub const SIDECAR: &str = "transform.json";
pub const CHAIN: &str = "chain.jsonl";
pub const DENSITY: &str = "density.json";
pub const SUMMARY: &str = "summary.json";
pub const ANGLES: &str = "angles.csv";

fn section<T>(s: &Option<T>) -> &T {
    s.as_ref().expect("section filled in by resolve")
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let s = section(&cfg.simulate);
    let model = s.model()?;
    let pairs = sample(&model, s.n, derive_seed(cfg.seed, "simulate"))?;
    let path = cfg.out.join(PAIRS);
    write_pairs_csv(&path, &pairs)?;
    log::info!("{model}: {} pairs written to {}", pairs.len(), path.display());
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn transform(cfg: &RunConfig) -> CliResult<()> {
    let t = section(&cfg.transform);
    let (xp, yp) = (t.x.as_deref().unwrap(), t.y.as_deref().unwrap());
    let xs = PriceSeries::read_csv(xp, t.x_label.clone().unwrap_or_else(|| stem(xp)))?;
    let ys = PriceSeries::read_csv(yp, t.y_label.clone().unwrap_or_else(|| stem(yp)))?;
    let (pairs, sidecar) = transform_prices(&xs, &ys)?;
    write_pairs_csv(&cfg.out.join(PAIRS), &pairs)?;
    write_json(&cfg.out.join(SIDECAR), &sidecar)?;
    log::info!("{} weekly pairs", sidecar.m);
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let f = section(&cfg.fit);
    let pairs = read_pairs_csv(f.data.as_deref().unwrap())?;
    let rows: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.x, p.y]).collect();
    let sample = decompose(&rows, f.radial_quantile)?;
    let mcmc = f.mcmc(derive_seed(cfg.seed, "mcmc"));
    let chain = run_chain(&sample, &mcmc)?;
    for w in &chain.warnings {
        log::warn!("{w}");
    }
    let summary = chain.summary(&sample, &mcmc);
    chain.write_jsonl(&cfg.out.join(CHAIN), mcmc.burn_in)?;
    chain.posterior_mean_density()?.write_json(&cfg.out.join(DENSITY))?;
    write_json(&cfg.out.join(SUMMARY), &summary)?;
    sample.write_csv(&cfg.out.join(ANGLES))?;
    log::info!(
        "k = {}, J = {}, mean acceptance {:.3}, min ESS {:.1}",
        summary.k,
        summary.j,
        summary.mean_acceptance,
        summary.min_ess
    );
    Ok(())
}

fn load_fit(dir: &Path) -> CliResult<(McmcChain, ChainSummary)> {
    let summary: ChainSummary = read_json(&dir.join(SUMMARY)).map_err(|e| data_err(&dir.join(SUMMARY), e))?;
    let chain = McmcChain::read_jsonl(&dir.join(CHAIN), &summary).map_err(|e| data_err(&dir.join(CHAIN), e))?;
    if chain.states.is_empty() {
        return Err(data_err(&dir.join(CHAIN), "no states"));
    }
    Ok((chain, summary))
}

pub fn manifold(cfg: &RunConfig) -> CliResult<()> {
    let m = section(&cfg.manifold);
    let grid = scalar_grid(&log_grid(m.x_min, m.x_max, m.x_points));
    let result = match (&m.fit, m.model()?) {
        (Some(dir), _) => {
            let (chain, _) = load_fit(dir)?;
            posterior_manifold(&chain, &m.q, &grid, m.credible_level, m.thin)?
        }
        (None, Some(model)) => manifold_grid(&model, &m.q, &grid)?,
        (None, None) => unreachable!("validated"),
    };
    result.write_csv(&cfg.out.join("manifold.csv"))?;
    result.write_json(&cfg.out.join("manifold.json"))?;
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> CliResult<()> {
    let p = section(&cfg.predict);
    let (chain, _) = load_fit(p.fit.as_deref().unwrap())?;
    let sidecar_path = p.transform.as_deref().unwrap();
    let sidecar: TransformSidecar = read_json(sidecar_path).map_err(|e| data_err(sidecar_path, e))?;
    let (xm, ym) = (sidecar.x_margin()?, sidecar.y_margin()?);
    let xf: Vec<_> = p.x.iter().map(|v| xm.to_frechet(*v)).collect();
    let grid = scalar_grid(&xf.iter().map(|m| m.value).collect::<Vec<_>>());
    let man = posterior_manifold(&chain, &p.q, &grid, p.credible_level, p.thin)?;
    let bands = man.bands.as_ref().expect("posterior manifold has bands");
    let mut out = String::from("q,x,x_frechet,y_frechet,y,y_lower,y_upper,extrapolated\n");
    for (i, q) in p.q.iter().enumerate() {
        for (j, x) in p.x.iter().enumerate() {
            let y = ym.from_frechet(man.values[i][j]);
            let lo = ym.from_frechet(bands.lower[i][j]);
            let hi = ym.from_frechet(bands.upper[i][j]);
            let extrapolated = xf[j].extrapolated || y.extrapolated || lo.extrapolated || hi.extrapolated;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_sig(*q),
                fmt_sig(*x),
                fmt_sig(xf[j].value),
                fmt_sig(man.values[i][j]),
                fmt_sig(y.value),
                fmt_sig(lo.value),
                fmt_sig(hi.value),
                extrapolated
            )
            .expect("writing to a string");
        }
    }
    write_atomic(&cfg.out.join("predict.csv"), out.as_bytes())?;
    Ok(())
}

pub fn residuals(cfg: &RunConfig) -> CliResult<()> {
    let r = section(&cfg.residuals);
    let (chain, summary) = load_fit(r.fit.as_deref().unwrap())?;
    let pairs = read_pairs_csv(r.data.as_deref().unwrap())?;
    let law = PosteriorLaw::from_chain(&chain, r.thin)?;
    let u = r.threshold.unwrap_or(summary.threshold_u);
    let report = quantile_residuals(&law, &pairs, u)?;
    report.write_csv(&cfg.out.join("residuals.csv"))?;
    println!(
        "n = {}, ks_statistic = {}, ks_p_value = {}",
        report.residuals.len(),
        fmt_sig(report.ks_statistic),
        fmt_sig(report.ks_p_value)
    );
    Ok(())
}
