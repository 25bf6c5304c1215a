use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use speedlimit::bounds::{fp_combined, fp_ml_type, fp_mt_type, VALIDITY_TOL};
use speedlimit::master::{
    evolve_master, random_detailed_balance_chain, symmetrize, MasterSpectral, TransitionMatrix,
};

fn rk4(w: &DMatrix<f64>, p0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let h = t / steps as f64;
    let mut p = nalgebra::DVector::from_column_slice(p0);
    let f = |v: &nalgebra::DVector<f64>| -(w * v);
    for _ in 0..steps {
        let k1 = f(&p);
        let k2 = f(&(&p + &k1 * (h / 2.0)));
        let k3 = f(&(&p + &k2 * (h / 2.0)));
        let k4 = f(&(&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    p.iter().copied().collect()
}

fn random_p0(n: usize, rng: &mut StdRng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

#[test]
fn two_state_matches_closed_form() {
    for k in [0.3, 1.0, 2.5] {
        let tm = TransitionMatrix::two_state(k).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let evo = evolve_master(&tm, &[1.0, 0.0], &times).unwrap();
        for (t, p) in times.iter().zip(&evo.trajectory) {
            let e = (-2.0 * k * t).exp();
            assert!((p[0] - 0.5 * (1.0 + e)).abs() < 1e-10);
            assert!((p[1] - 0.5 * (1.0 - e)).abs() < 1e-10);
        }
        for (t, ov) in times.iter().zip(&evo.curve.overlaps) {
            assert!((ov - 0.5 * (1.0 + (-2.0 * k * t).exp())).abs() < 1e-10);
        }
    }
}

#[test]
fn random_chains_match_rk4() {
    let mut rng = StdRng::seed_from_u64(21);
    for n in 3..=8 {
        let tm = random_detailed_balance_chain(n, &mut rng).unwrap();
        let p0 = random_p0(n, &mut rng);
        let times = [0.0, 0.3, 1.0, 2.5];
        let evo = evolve_master(&tm, &p0, &times).unwrap();
        for (t, p) in times.iter().zip(&evo.trajectory) {
            let oracle = rk4(tm.rates(), &p0, *t, 20000);
            for (a, b) in p.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "n={n} t={t}: {a} vs {b}");
            }
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn symmetrized_spectrum_matches_general_eigensolver() {
    let mut rng = StdRng::seed_from_u64(22);
    for n in 3..=8 {
        for _ in 0..3 {
            let tm = random_detailed_balance_chain(n, &mut rng).unwrap();
            let spec = MasterSpectral::new(&tm, &random_p0(n, &mut rng)).unwrap();
            let general = tm.rates().clone().complex_eigenvalues();
            let mut oracle: Vec<f64> = general.iter().map(|z| z.re).collect();
            assert!(general.iter().all(|z| z.im.abs() < 1e-8));
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in spec.eigenvalues().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
            }
            assert!(spec.eigenvalues()[0].abs() < 1e-10);
        }
    }
}

#[test]
fn symmetrized_operator_is_symmetric() {
    let mut rng = StdRng::seed_from_u64(23);
    let tm = random_detailed_balance_chain(6, &mut rng).unwrap();
    assert!(symmetrize(&tm).unwrap().hermiticity_residual() < 1e-12);
}

#[test]
fn bounds_hold_on_random_chains() {
    let mut rng = StdRng::seed_from_u64(24);
    for n in 2..=8 {
        let tm = random_detailed_balance_chain(n, &mut rng).unwrap();
        let spec = MasterSpectral::new(&tm, &random_p0(n, &mut rng)).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..60 {
            let t = k as f64 * 0.1;
            let b = spec.inputs(t).unwrap();
            assert!(b.overlap_t <= last + 1e-14);
            last = b.overlap_t;
            for tau in [fp_ml_type(&b), fp_mt_type(&b), fp_combined(&b)] {
                if let Some(tau) = tau.unwrap().value() {
                    assert!(t - tau >= -VALIDITY_TOL, "n={n} t={t} tau={tau}");
                }
            }
        }
    }
}

#[test]
fn biased_ring_fails_detailed_balance() {
    let w = DMatrix::from_row_slice(3, 3, &[2.0, -0.5, -1.5, -1.5, 2.0, -0.5, -0.5, -1.5, 2.0]);
    let tm = TransitionMatrix::new(w, None).unwrap();
    let report = tm.detailed_balance();
    assert!(!report.passes);
    assert!(report.residual > 0.1);
    assert!(MasterSpectral::new(&tm, &[1.0, 0.0, 0.0]).is_err());
}
