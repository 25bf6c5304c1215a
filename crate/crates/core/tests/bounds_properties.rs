use std::f64::consts::PI;

use proptest::prelude::*;

use speedlimit::bounds::{
    csl_ml_type, csl_mt_type, fp_ml_type, fp_mt_type, qsl_combined, qsl_ml, qsl_mt, BoundInputs, Tau, VALIDITY_TOL,
};
use speedlimit::hilbert::SpectralDecomposition;
use num_complex::Complex64;

fn value(t: Tau) -> f64 {
    t.value().expect("finite bound")
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn classical_mt_dominates_ml(norm0 in 1e-6f64..1e3, frac in -1.0f64..1.0, m2 in 1e-6f64..1e6) {
        let b = BoundInputs::new(norm0, frac * norm0, 0.0, m2);
        let ml = value(csl_ml_type(&b).unwrap());
        let mt = value(csl_mt_type(&b).unwrap());
        prop_assert!(mt >= ml * (1.0 - 1e-12), "mt {} < ml {}", mt, ml);
    }

    #[test]
    fn moment2_homogeneity(norm0 in 1e-3f64..1e3, frac in -0.99f64..0.99, m2 in 1e-3f64..1e3) {
        let b = BoundInputs::new(norm0, frac * norm0, 0.5 * norm0, m2);
        let b2 = BoundInputs::new(norm0, frac * norm0, 0.5 * norm0, 2.0 * m2);
        for f in [csl_ml_type, csl_mt_type] {
            let ratio = value(f(&b).unwrap()) / value(f(&b2).unwrap());
            prop_assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
        }
        if frac > 0.0 {
            let ratio = value(fp_mt_type(&b).unwrap()) / value(fp_mt_type(&b2).unwrap());
            prop_assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn imaginary_time_bounds_hold_on_random_spectra(
        mut lambdas in prop::collection::vec(0.0f64..20.0, 1..8),
        weights in prop::collection::vec(0.01f64..1.0, 8),
        t in 0.0f64..5.0,
    ) {
        lambdas.sort_by(f64::total_cmp);
        let n = lambdas.len();
        let coeffs: Vec<Complex64> = weights[..n].iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect();
        let d = SpectralDecomposition::from_spectrum(lambdas, coeffs).unwrap();
        let (n0, ov, m1, m2) = d.decay_scalars(t).unwrap();
        prop_assume!(ov > 1e-250);
        let b = BoundInputs::new(n0, ov, m1, m2);
        for tau in [fp_ml_type(&b), fp_mt_type(&b)] {
            let tau = tau.unwrap().value().unwrap();
            prop_assert!(t - tau >= -VALIDITY_TOL * t.max(1.0), "t {} tau {}", t, tau);
        }
    }

    #[test]
    fn unitary_classical_bounds_hold_on_random_spectra(
        mut lambdas in prop::collection::vec(-10.0f64..10.0, 1..8),
        weights in prop::collection::vec(0.01f64..1.0, 8),
        t in 0.0f64..5.0,
    ) {
        lambdas.sort_by(f64::total_cmp);
        let n = lambdas.len();
        let coeffs: Vec<Complex64> = weights[..n].iter().map(|w| Complex64::new(w.sqrt(), 0.0)).collect();
        let d = SpectralDecomposition::from_spectrum(lambdas, coeffs).unwrap();
        let ov = d.overlap(t, speedlimit::hilbert::Evolution::Unitary).unwrap();
        let b = BoundInputs::new(d.norm0(), ov, 0.0, d.spectral_moment(2));
        for tau in [csl_ml_type(&b), csl_mt_type(&b)] {
            let tau = tau.unwrap().value().unwrap();
            prop_assert!(t - tau >= -VALIDITY_TOL, "t {} tau {}", t, tau);
        }
    }
}

#[test]
fn quantum_two_level_values() {
    assert!((value(qsl_mt(0.5, 1.0).unwrap()) - PI).abs() < 1e-15);
    assert!((value(qsl_ml(0.5, 1.0).unwrap()) - PI).abs() < 1e-15);
    assert!((value(qsl_combined(0.5, 0.25, 2.0).unwrap()) - 4.0 * PI).abs() < 1e-14);
    assert!(qsl_mt(0.0, 1.0).unwrap().value().is_none());
    assert!(qsl_ml(0.0, 1.0).unwrap().value().is_none());
    assert!(qsl_combined(0.0, 0.0, 1.0).unwrap().value().is_none());
    assert!(qsl_mt(-1.0, 1.0).is_err());
    assert!(qsl_mt(1.0, 0.0).is_err());
}

#[test]
fn degenerate_inputs() {
    let still = BoundInputs::new(1.0, 1.0, 0.0, 0.0);
    assert!(csl_ml_type(&still).unwrap().is_stationary());
    assert!(csl_mt_type(&still).unwrap().is_stationary());
    assert!(fp_ml_type(&still).unwrap().is_stationary());
    assert!(fp_mt_type(&still).unwrap().is_stationary());
    assert!(csl_ml_type(&BoundInputs::new(1.0, 0.5, 0.0, 0.0)).is_err());
    assert!(csl_ml_type(&BoundInputs::new(0.0, 0.0, 0.0, 1.0)).is_err());
    assert!(csl_mt_type(&BoundInputs::new(1.0, 1.1, 0.0, 1.0)).is_err());
    assert!(fp_ml_type(&BoundInputs::new(1.0, -0.1, 1.0, 1.0)).is_err());
    // Marginal excess from roundoff is clamped.
    let v = value(csl_mt_type(&BoundInputs::new(1.0, 1.0 + 1e-12, 0.0, 1.0)).unwrap());
    assert!(v.abs() < 1e-5);
}

#[test]
fn two_state_master_worked_example() {
    // W = [[1,-1],[-1,1]], P0 = (1,0): q-frame norm 2, eigenvalues {0, 2}
    // with weight 1 each.
    let t: f64 = 0.7;
    let b = BoundInputs::new(2.0, 1.0 + (-2.0 * t).exp(), 2.0, 4.0);
    let ml = value(fp_ml_type(&b).unwrap());
    let mt = value(fp_mt_type(&b).unwrap());
    let ml_exact = (2.0 / (1.0 + (-2.0 * t).exp())).ln();
    let mt_exact = 2.0 * (2f64.sqrt() - (1.0 + (-2.0 * t).exp()).sqrt()) / 2.0;
    assert!((ml - ml_exact).abs() < 1e-12);
    assert!((mt - mt_exact).abs() < 1e-12);
    assert!(ml <= t && mt <= t);
}
