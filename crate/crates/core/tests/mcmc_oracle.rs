//! Chain marginals against an independent rejection sampler of the exact
//! posterior on a basis with two free weights (J = 5, d = 2).

use bmreg_core::angular::{BernsteinBasis, PseudoAngleSample};
use bmreg_core::mcmc::{run_with_basis, McmcConfig};
use bmreg_core::Degree;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

const C: f64 = 1.5;

// Compositions of 5 into two parts, lexicographic: (1,4), (2,3), (3,2), (4,1).
// With free weights p2 = π(2,3), p3 = π(3,2) the constraints
// Σπ = 1 and Σπ α₁ = 5/2 give the corners below.
fn full_weights(p2: f64, p3: f64) -> Option<[f64; 4]> {
    let b = (1.5 - p2 - 2.0 * p3) / 3.0;
    let a = 1.0 - p2 - p3 - b;
    if a > 0.0 && b > 0.0 && p2 > 0.0 && p3 > 0.0 {
        Some([a, p2, p3, b])
    } else {
        None
    }
}

fn beta_fn(a: f64, b: f64) -> f64 {
    // Integer arguments only: B(a, b) = (a-1)!(b-1)!/(a+b-1)!
    let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
    f(a as u32 - 1) * f(b as u32 - 1) / f(a as u32 + b as u32 - 1)
}

fn log_target(p2: f64, p3: f64, angles: &[f64]) -> f64 {
    let Some(pi) = full_weights(p2, p3) else {
        return f64::NEG_INFINITY;
    };
    let alphas = [(1.0, 4.0), (2.0, 3.0), (3.0, 2.0), (4.0, 1.0)];
    let mut lp: f64 = pi.iter().map(|p| (C - 1.0) * p.ln()).sum();
    for &w in angles {
        let h: f64 = pi
            .iter()
            .zip(alphas)
            .map(|(p, (a1, a2))| p * w.powf(a1 - 1.0) * (1.0 - w).powf(a2 - 1.0) / beta_fn(a1, a2))
            .sum();
        lp += h.ln();
    }
    lp
}

fn rejection_draws(angles: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    let g = 400;
    for i in 1..g {
        for j in 1..g {
            max = max.max(log_target(i as f64 / g as f64, j as f64 / g as f64, angles));
        }
    }
    // Grid maximum plus a safety margin; verified below.
    let bound = max + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (p2, p3): (f64, f64) = (rng.random(), rng.random());
        let lt = log_target(p2, p3, angles);
        assert!(lt <= bound, "rejection envelope too low");
        if rng.random::<f64>().ln() < lt - bound {
            out.push(p2);
        }
    }
    out
}

fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn chain_p2(sample: &PseudoAngleSample, seed: u64) -> Vec<f64> {
    let basis = BernsteinBasis::new(5, 2).unwrap();
    assert_eq!(basis.compositions()[1].alpha, vec![2, 3]);
    let cfg = McmcConfig {
        iterations: 60_000,
        burn_in: 10_000,
        prior_concentration: C,
        degree: Degree::Fixed(5),
        seed,
        ..McmcConfig::default()
    };
    let chain = run_with_basis(sample, basis.clone(), &cfg).unwrap();
    assert_eq!(chain.states.len(), 50_000);
    chain.states.iter().map(|s| basis.weights(s).unwrap()[1]).collect()
}

#[test]
fn posterior_marginal_matches_rejection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let beta = Beta::new(2.0, 3.0).unwrap();
    let angles: Vec<f64> = (0..12).map(|_| beta.sample(&mut rng)).collect();
    let sample = PseudoAngleSample::from_angles(angles.iter().map(|w| vec![*w, 1.0 - w]).collect()).unwrap();
    let mut chain = chain_p2(&sample, 5);
    let mut oracle = rejection_draws(&angles, 50_000, 6);
    let d = ks_two_sample(&mut chain, &mut oracle);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn prior_only_marginal_matches_rejection_oracle() {
    let mut chain = chain_p2(&PseudoAngleSample::empty(2), 9);
    let mut oracle = rejection_draws(&[], 50_000, 10);
    let d = ks_two_sample(&mut chain, &mut oracle);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn every_kept_state_rebuilds_to_valid_weights() {
    // The default prior (c = 0.1) pushes corner weights towards zero, where
    // rounding decides their sign.
    let model = bmreg_core::EvModel::scenario(2).unwrap();
    let pairs = bmreg_core::models::sample(&model, 2000, 3).unwrap();
    let rows: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.x, p.y]).collect();
    let s = bmreg_core::decompose(&rows, 0.95).unwrap();
    let cfg = McmcConfig {
        iterations: 4000,
        burn_in: 1000,
        seed: 4,
        ..McmcConfig::default()
    };
    let chain = bmreg_core::run_chain(&s, &cfg).unwrap();
    let basis = chain.basis().unwrap();
    for (i, st) in chain.states.iter().enumerate() {
        let w = basis.weights(st).unwrap_or_else(|e| panic!("state {i}: {e}"));
        assert!(basis.corner_indices().iter().all(|&c| w[c] > 0.0), "state {i}");
    }
}
