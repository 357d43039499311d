//! Shared inputs for the benchmarks.

use bmreg_core::angular::{decompose, PseudoAngleSample};
use bmreg_core::models::sample;
use bmreg_core::EvModel;

/// Exceedances of `n` simulated pairs from a scenario, at the 95% radius.
pub fn scenario_sample(scenario: u8, n: usize, seed: u64) -> PseudoAngleSample {
    let pairs = sample(&EvModel::scenario(scenario).expect("scenario exists"), n, seed).expect("sampling succeeds");
    let rows: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.x, p.y]).collect();
    decompose(&rows, 0.95).expect("enough exceedances")
}
