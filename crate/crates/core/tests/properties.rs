use bmreg_core::angular::weights_from_logits;
use bmreg_core::io::{fmt_sig, round_sig};
use bmreg_core::manifold::logistic_quantile;
use bmreg_core::pipeline::empirical_frechet_transform;
use bmreg_core::EvModel;
use proptest::prelude::*;

proptest! {
    #[test]
    fn valid_weights_satisfy_constraints(logits in prop::collection::vec(-3.0f64..3.0, 3)) {
        // J = 6, d = 2 has 3 free weights; so does J = 5, d = 3.
        for (j, d) in [(6, 2), (5, 3)] {
            if let Ok(h) = weights_from_logits(&logits, j, d) {
                let (norm, mean) = h.constraint_errors();
                prop_assert!(norm <= 1e-12 && mean <= 1e-10, "({j},{d}): {norm:e} {mean:e}");
                prop_assert!(h.weights().iter().all(|w| *w >= 0.0));
            }
        }
    }

    #[test]
    fn frechet_transform_preserves_order(v in prop::collection::vec(-5.0f64..5.0, 2..60)) {
        let z = empirical_frechet_transform(&v).unwrap();
        for i in 0..v.len() {
            prop_assert!(z[i] > 0.0 && z[i].is_finite());
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(z[i] < z[j]);
                } else if v[i] == v[j] {
                    prop_assert_eq!(z[i], z[j]);
                }
            }
        }
    }

    #[test]
    fn logistic_quantile_monotone(alpha in 0.05f64..0.95, q in 0.05f64..0.9, x in 0.05f64..50.0) {
        let y = logistic_quantile(alpha, q, x).unwrap();
        prop_assert!(logistic_quantile(alpha, q + 0.05, x).unwrap() >= y - 1e-9 * y);
        prop_assert!(logistic_quantile(alpha, q, x * 1.1).unwrap() >= y - 1e-9 * y);
    }

    #[test]
    fn conditional_cdf_is_a_cdf(lambda in 0.05f64..3.0, x in 0.05f64..20.0, y in 0.05f64..20.0) {
        let m = EvModel::husler_reiss(lambda).unwrap();
        let g = m.conditional_cdf(y, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!(m.conditional_cdf(y * 1.5, x).unwrap() >= g);
    }

    #[test]
    fn printed_values_reparse_exactly(v in prop::num::f64::NORMAL) {
        prop_assert_eq!(fmt_sig(v).parse::<f64>().unwrap(), round_sig(v));
    }
}
