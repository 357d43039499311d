//! Quantile residuals of a law on its own simulated data are standard Normal.

use bmreg_core::angular::weights_from_logits;
use bmreg_core::diagnostics::quantile_residuals;
use bmreg_core::models::sample_law;
use bmreg_core::ConditionalLaw;

fn pass_count<L: ConditionalLaw + Sync>(law: &L, n: usize) -> usize {
    (0..100u64)
        .filter(|&seed| {
            let pairs = sample_law(&|y: f64, x: f64| law.conditional_cdf(y, &[x]), n, 1000 + seed).unwrap();
            // u = 0 keeps every pair; above a positive threshold the
            // residuals are those of a truncated law and not exactly Normal.
            let r = quantile_residuals(law, &pairs, 0.0).unwrap();
            assert_eq!(r.residuals.len(), n);
            r.ks_p_value > 0.01
        })
        .count()
}

#[test]
fn bernstein_residuals_pass_ks_in_95_of_100_seeds() {
    let h = weights_from_logits(&[0.3, -0.2, 0.8], 6, 2).unwrap();
    let passed = pass_count(&h, 1000);
    assert!(passed >= 95, "{passed} of 100 seeds passed");
}

#[test]
fn logistic_residuals_pass_ks_in_95_of_100_seeds() {
    let m = bmreg_core::EvModel::logistic(0.6).unwrap();
    let passed = pass_count(&m, 1000);
    assert!(passed >= 95, "{passed} of 100 seeds passed");
}
