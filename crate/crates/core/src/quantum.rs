//! Finite-dimensional unitary evolution: energy statistics and the first
//! orthogonalization time of a pure state.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{HermitianOperator, InnerProductSpace, SpectralDecomposition};

/// `|<psi|psi(t)>|` below this counts as orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-8;

// Scan steps per period of the fastest populated frequency.
const SCAN_STEPS_PER_PERIOD: f64 = 64.0;
const GOLDEN_ITERATIONS: usize = 200;

/// Normalized pure state under a Hermitian Hamiltonian (plain inner product).
#[derive(Debug, Clone)]
pub struct QuantumSystem {
    decomposition: SpectralDecomposition,
    hbar: f64,
}

impl QuantumSystem {
    /// The state is normalized here; a zero state is rejected.
    pub fn new(hamiltonian: DMatrix<Complex64>, state: DVector<Complex64>, hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::param("hbar", "must be > 0"));
        }
        let n = hamiltonian.nrows();
        let h = HermitianOperator::new(hamiltonian, InnerProductSpace::uniform(n.max(1), 1.0)?)?;
        let norm = state.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::param("state", "must be a nonzero finite vector"));
        }
        let psi = state / Complex64::new(norm, 0.0);
        let basis = Arc::new(h.eigenbasis()?);
        Ok(Self {
            decomposition: basis.decompose(&psi)?,
            hbar,
        })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Lowest eigenvalue of the Hamiltonian.
    pub fn ground_energy(&self) -> f64 {
        self.decomposition.eigenvalues()[0]
    }

    /// `E = <H> - E_ground`.
    pub fn mean_energy(&self) -> f64 {
        let e0 = self.ground_energy();
        self.populations()
            .zip(self.decomposition.eigenvalues())
            .map(|(p, e)| p * (e - e0))
            .sum()
    }

    /// `sqrt(<H^2> - <H>^2)`, computed from energies relative to the ground.
    pub fn energy_spread(&self) -> f64 {
        let e0 = self.ground_energy();
        let (m1, m2) = self
            .populations()
            .zip(self.decomposition.eigenvalues())
            .fold((0.0, 0.0), |(a, b), (p, e)| {
                let de = e - e0;
                (a + p * de, b + p * de * de)
            });
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    fn populations(&self) -> impl Iterator<Item = f64> + '_ {
        self.decomposition.coefficients().iter().map(|c| c.norm_sqr())
    }

    /// `<psi|psi(t)>` with `psi(t) = exp(-i H t / hbar) psi`.
    pub fn autocorrelation(&self, t: f64) -> Complex64 {
        self.decomposition.autocorrelation(t / self.hbar)
    }

    /// `|<psi|psi(t)>|^2`.
    pub fn fidelity(&self, t: f64) -> f64 {
        self.autocorrelation(t).norm_sqr()
    }

    /// First `t` in `(0, t_max]` with `|<psi|psi(t)>| < ORTHOGONAL_TOL`, if any.
    ///
    /// `|A(t)|` is scanned at a fraction of the fastest populated period and
    /// each small local minimum is refined by golden-section search.
    pub fn orthogonalization_time(&self, t_max: f64) -> Option<f64> {
        let energies: Vec<f64> = self
            .populations()
            .zip(self.decomposition.eigenvalues())
            .filter(|(p, _)| *p > 1e-14)
            .map(|(_, &e)| e)
            .collect();
        let spread = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - energies.iter().copied().fold(f64::INFINITY, f64::min);
        if !(spread > 0.0 && t_max > 0.0) {
            return None;
        }
        let dt = 2.0 * std::f64::consts::PI * self.hbar / (spread * SCAN_STEPS_PER_PERIOD);
        let amp = |t: f64| self.autocorrelation(t).norm();
        let steps = (t_max / dt).ceil() as usize + 1;
        let mut prev = (0.0, amp(0.0));
        let mut cur = (dt, amp(dt));
        for k in 2..=steps + 1 {
            let t = k as f64 * dt;
            let next = (t, amp(t));
            // |A| moves at most `spread * dt / hbar` per step, about 0.1.
            if cur.1 <= prev.1 && cur.1 <= next.1 && cur.1 < 0.25 {
                let (t_min, a_min) = golden_min(&amp, prev.0, next.0);
                if a_min < ORTHOGONAL_TOL && t_min <= t_max {
                    return Some(t_min);
                }
            }
            if cur.0 > t_max {
                break;
            }
            prev = cur;
            cur = next;
        }
        None
    }
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
