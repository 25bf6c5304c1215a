//! One-dimensional Fokker-Planck relaxation `dP/dt = d/dx (dP/dx + 2 W' P)`
//! mapped onto imaginary-time evolution `d psi/dt = -H_F psi` through
//! `P = exp(-W) psi`, with `H_F = -d^2/dx^2 + W'^2 - W''`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundInputs;
use crate::error::{Error, Result};
use crate::fd::{second_derivative_matrix, Polynomial, StencilOrder};
use crate::hilbert::{real_state, Eigenbasis, Evolution, HermitianOperator, InnerProductSpace, SpectralDecomposition, State};

/// Boundary values of `exp(-2W)` must stay below this fraction of the peak.
pub const CONFINEMENT_TOL: f64 = 1e-10;

/// `exp(+W)` is applied only where `P` exceeds this fraction of its maximum.
pub const TRANSFORM_FLOOR: f64 = 1e-14;

/// Relative tolerance (against `||H_F||_inf`) for the lowest eigenvalue
/// being nonnegative.
pub const SPECTRUM_SIGN_TOL: f64 = 1e-10;

// exp overflows just above 709.
const MAX_EXPONENT: f64 = 700.0;

/// Confining drift potential `W(x)` sampled on interior nodes of `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPotential {
    w: Polynomial,
    x_min: f64,
    x_max: f64,
    points: usize,
}

impl DriftPotential {
    /// Requires even degree, positive leading coefficient, and `exp(-2W)`
    /// negligible at the grid edges.
    pub fn new(w: Polynomial, x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        match w.degree() {
            Some(d) if d >= 2 && d % 2 == 0 && w.leading() > 0.0 => {}
            _ => {
                return Err(Error::param(
                    "potential",
                    format!(
                        "W must have even degree >= 2 and a positive leading coefficient (got {:?})",
                        w.coeffs()
                    ),
                ))
            }
        }
        if w.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::param("potential", "coefficients must be finite"));
        }
        if points < 8 {
            return Err(Error::param("grid.points", format!("need at least 8 points, got {points}")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::param("grid", format!("need finite bounds with max > min, got [{x_min}, {x_max}]")));
        }
        let pot = Self { w, x_min, x_max, points };
        let wv = pot.w_values();
        let w_min = wv.iter().copied().fold(f64::INFINITY, f64::min);
        // exp(-2W) / max exp(-2W) at the two end nodes.
        let edge = (-2.0 * (wv[0] - w_min)).exp().max((-2.0 * (wv[points - 1] - w_min)).exp());
        if edge >= CONFINEMENT_TOL {
            return Err(Error::DomainTooSmall(format!(
                "stationary density at the boundary is {edge:.3e} of its peak (limit {CONFINEMENT_TOL:e}); widen [{x_min}, {x_max}]"
            )));
        }
        Ok(pot)
    }

    /// `W = k x^2 / 2`, the Ornstein-Uhlenbeck case.
    pub fn harmonic(k: f64, x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::param("potential.k", "must be > 0"));
        }
        Self::new(Polynomial::new(vec![0.0, 0.0, 0.5 * k]), x_min, x_max, points)
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.w
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    pub fn space(&self) -> InnerProductSpace {
        InnerProductSpace::uniform(self.points, self.h()).expect("positive spacing")
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }

    pub fn w_values(&self) -> Vec<f64> {
        self.sample(|x| self.w.eval(x))
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.h()
    }

    /// `exp(-W)`, the zero mode of `H_F`, unnormalized.
    pub fn ground_state(&self) -> Vec<f64> {
        self.sample(|x| (-self.w.eval(x)).exp())
    }

    /// `exp(-2W)` normalized to unit quadrature mass.
    pub fn stationary_density(&self) -> Vec<f64> {
        let p: Vec<f64> = self.sample(|x| (-2.0 * self.w.eval(x)).exp());
        let mass = self.integrate(&p);
        p.into_iter().map(|v| v / mass).collect()
    }
}

/// `H_F = -d^2/dx^2 + W'^2 - W''` with the default sixth-order stencil.
pub fn build_hf(w: &DriftPotential) -> Result<HermitianOperator> {
    build_hf_with(w, StencilOrder::default())
}

pub fn build_hf_with(w: &DriftPotential, order: StencilOrder) -> Result<HermitianOperator> {
    let n = w.points();
    let d1 = w.polynomial().derivative();
    let d2 = d1.derivative();
    let mut m: DMatrix<f64> = -second_derivative_matrix(n, w.h(), order);
    for i in 0..n {
        let x = w.x(i);
        let g = d1.eval(x);
        m[(i, i)] += g * g - d2.eval(x);
    }
    HermitianOperator::from_real(&m, w.space())
}

/// Error if the lowest eigenvalue is negative beyond roundoff.
pub fn check_spectrum_nonnegative(basis: &Eigenbasis, hf: &HermitianOperator) -> Result<()> {
    let lowest = basis.eigenvalues().first().copied().unwrap_or(0.0);
    let tol = SPECTRUM_SIGN_TOL * hf.norm_inf();
    if lowest < -tol {
        return Err(Error::Numerical(format!(
            "lowest eigenvalue {lowest:.3e} is below -{tol:.3e}; H_F should be nonnegative"
        )));
    }
    Ok(())
}

/// `psi = exp(W) P` on the potential's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedState {
    values: Vec<f64>,
}

impl TransformedState {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_state(&self) -> State {
        real_state(&self.values)
    }

    /// `P = exp(-W) psi`.
    pub fn to_density(&self, w: &DriftPotential) -> Result<Vec<f64>> {
        if self.values.len() != w.points() {
            return Err(Error::DimensionMismatch {
                expected: w.points(),
                found: self.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(w.w_values())
            .map(|(psi, wx)| psi * (-wx).exp())
            .collect())
    }
}

/// Map a density onto the imaginary-time frame. Nodes where `P` is below
/// `TRANSFORM_FLOOR * max P` are set to zero.
pub fn fp_to_schrodinger(p: &[f64], w: &DriftPotential) -> Result<TransformedState> {
    if p.len() != w.points() {
        return Err(Error::DimensionMismatch {
            expected: w.points(),
            found: p.len(),
        });
    }
    if let Some(k) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("density", format!("value {} at node {k} is not >= 0", p[k])));
    }
    let floor = TRANSFORM_FLOOR * p.iter().copied().fold(0.0, f64::max);
    let wv = w.w_values();
    let mut overflow = Vec::new();
    let values: Vec<f64> = p
        .iter()
        .zip(&wv)
        .enumerate()
        .map(|(i, (&pi, &wi))| {
            if pi <= floor || pi == 0.0 {
                return 0.0;
            }
            let psi = wi.exp() * pi;
            if wi > MAX_EXPONENT || !psi.is_finite() {
                overflow.push(i);
            }
            psi
        })
        .collect();
    if !overflow.is_empty() {
        let shown: Vec<String> = overflow.iter().take(16).map(|i| format!("{i} (x={:.4})", w.x(*i))).collect();
        return Err(Error::Numerical(format!(
            "exp(W) overflows where the density is not negligible at {} node(s): {}",
            overflow.len(),
            shown.join(", ")
        )));
    }
    Ok(TransformedState { values })
}

/// Scalars feeding the imaginary-time bounds at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpInputs {
    pub norm0: f64,
    pub overlap_t: f64,
    /// `<psi|H_F|psi>`, not divided by the norm.
    pub mean_hf: f64,
    /// `<psi|H_F^2|psi>`.
    pub mean_hf2: f64,
}

impl FpInputs {
    pub fn bound_inputs(&self) -> BoundInputs {
        BoundInputs::new(self.norm0, self.overlap_t, self.mean_hf, self.mean_hf2)
    }
}

/// A transformed initial state expanded in the eigenbasis of `H_F`.
#[derive(Debug, Clone)]
pub struct FpSpectral {
    decomposition: SpectralDecomposition,
}

impl FpSpectral {
    pub fn new(psi0: &TransformedState, hf: &HermitianOperator) -> Result<Self> {
        let basis = Arc::new(hf.eigenbasis()?);
        check_spectrum_nonnegative(&basis, hf)?;
        Self::with_basis(psi0, &basis)
    }

    /// Reuse a basis already checked with [`check_spectrum_nonnegative`].
    pub fn with_basis(psi0: &TransformedState, basis: &Arc<Eigenbasis>) -> Result<Self> {
        Ok(Self {
            decomposition: basis.decompose(&psi0.to_state())?,
        })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn inputs(&self, t: f64) -> Result<FpInputs> {
        let (norm0, overlap_t, mean_hf, mean_hf2) = self.decomposition.decay_scalars(t)?;
        Ok(FpInputs {
            norm0,
            overlap_t,
            mean_hf,
            mean_hf2,
        })
    }

    /// `psi(t)` mapped back to a density.
    pub fn density_at(&self, t: f64, w: &DriftPotential) -> Result<Vec<f64>> {
        let psi = self.decomposition.evolve(t, Evolution::Decaying)?;
        TransformedState::new(psi.iter().map(|z| z.re).collect()).to_density(w)
    }
}

/// `(norm0, overlap_t, mean_hf, mean_hf2)` for `psi0` under `exp(-H_F t)`.
pub fn fp_overlap_inputs(psi0: &TransformedState, hf: &HermitianOperator, t: f64) -> Result<FpInputs> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    FpSpectral::new(psi0, hf)?.inputs(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ou(k: f64) -> DriftPotential {
        DriftPotential::harmonic(k, -8.0, 8.0, 256).unwrap()
    }

    #[test]
    fn rejects_non_confining_potentials() {
        let odd = Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]);
        assert!(DriftPotential::new(odd, -5.0, 5.0, 64).is_err());
        let inverted = Polynomial::new(vec![0.0, 0.0, -1.0]);
        assert!(DriftPotential::new(inverted, -5.0, 5.0, 64).is_err());
        let linear = Polynomial::new(vec![0.0, 1.0]);
        assert!(DriftPotential::new(linear, -5.0, 5.0, 64).is_err());
        assert!(matches!(
            DriftPotential::harmonic(1.0, -2.0, 2.0, 64),
            Err(Error::DomainTooSmall(_))
        ));
    }

    #[test]
    fn ou_spectrum() {
        for k in [1.0, 3.0] {
            let w = ou(k);
            let hf = build_hf(&w).unwrap();
            let basis = hf.eigenbasis().unwrap();
            check_spectrum_nonnegative(&basis, &hf).unwrap();
            for n in 0..5 {
                assert!((basis.eigenvalues()[n] - 2.0 * k * n as f64).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn ground_state_residual() {
        let w = ou(1.0);
        let hf = build_hf(&w).unwrap();
        let g = real_state(&w.ground_state());
        let r = hf.second_moment(&g).unwrap().sqrt() / w.space().norm_squared(&g).unwrap().sqrt();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn stationary_density_maps_to_ground_state() {
        let w = ou(1.0);
        let p: Vec<f64> = w.sample(|x| (-x * x).exp());
        let psi = fp_to_schrodinger(&p, &w).unwrap();
        // Nodes below the transform floor are zeroed; the rest match exp(-W).
        for (a, b) in psi.values().iter().zip(w.ground_state()) {
            assert!(*a == 0.0 || (a - b).abs() <= 1e-12 * b);
        }
        let back = psi.to_density(&w).unwrap();
        let peak = p.iter().copied().fold(0.0, f64::max);
        for (a, b) in back.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-12 * peak);
        }
    }

    #[test]
    fn zero_and_invalid_densities() {
        let w = ou(1.0);
        let psi = fp_to_schrodinger(&vec![0.0; 256], &w).unwrap();
        assert!(psi.values().iter().all(|v| *v == 0.0));
        let mut bad = vec![0.0; 256];
        bad[3] = -1.0;
        assert!(fp_to_schrodinger(&bad, &w).is_err());
        assert!(fp_to_schrodinger(&[1.0; 3], &w).is_err());
    }

    #[test]
    fn overflow_lists_offending_nodes() {
        let w = DriftPotential::new(Polynomial::new(vec![0.0, 0.0, 20.0]), -8.0, 8.0, 64).unwrap();
        let p = vec![1.0; 64];
        match fp_to_schrodinger(&p, &w) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("node")),
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn ground_state_is_stationary_in_overlap() {
        let w = ou(1.0);
        let hf = build_hf(&w).unwrap();
        let psi = TransformedState::new(w.ground_state());
        let spec = FpSpectral::new(&psi, &hf).unwrap();
        for t in [0.0, 1.0, 5.0] {
            let i = spec.inputs(t).unwrap();
            assert!((i.overlap_t - i.norm0).abs() < 1e-8 * i.norm0);
            assert!(i.mean_hf.abs() < 1e-8 * i.norm0);
        }
        assert!(fp_overlap_inputs(&psi, &hf, -1.0).is_err());
    }

    #[test]
    fn first_excited_mode() {
        // psi_1 = x exp(-x^2/2) is the first eigenfunction of H_F for W = x^2/2.
        let w = ou(1.0);
        let hf = build_hf(&w).unwrap();
        let psi = TransformedState::new(w.sample(|x| x * (-x * x / 2.0).exp()));
        let spec = FpSpectral::new(&psi, &hf).unwrap();
        let i = spec.inputs(1.0).unwrap();
        assert_abs_diff_eq!(i.overlap_t / i.norm0, (-2.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(i.mean_hf / i.norm0, 2.0, epsilon = 1e-6);
        assert!(i.mean_hf2 >= i.mean_hf * i.mean_hf / i.norm0);
    }

    #[test]
    fn half_half_mixture() {
        let w = ou(1.0);
        let hf = build_hf(&w).unwrap();
        // Equal-norm ground and first-excited components.
        let g = w.ground_state();
        let e = w.sample(|x| x * (-x * x / 2.0).exp());
        let (ng, ne) = (w.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>()), w.integrate(&e.iter().map(|v| v * v).collect::<Vec<_>>()));
        let scale = (ng / ne).sqrt();
        let psi = TransformedState::new(g.iter().zip(&e).map(|(a, b)| a + scale * b).collect());
        let i = fp_overlap_inputs(&psi, &hf, 1.0).unwrap();
        assert_abs_diff_eq!(i.overlap_t / i.norm0, 0.5 + 0.5 * (-2.0f64).exp(), epsilon = 1e-6);
    }
}
