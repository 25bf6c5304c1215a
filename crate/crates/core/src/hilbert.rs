//! Weighted inner-product spaces, self-adjoint operators and spectral
//! time evolution.
//!
//! Every dynamical family in this crate reduces to the same picture: a
//! generator that is self-adjoint under a quadrature inner product
//! `<f|g> = sum_k w_k conj(f_k) g_k`, expanded in its eigenbasis. Unitary
//! evolution multiplies expansion coefficients by `exp(-i lambda t)`,
//! decaying evolution by `exp(-lambda t)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State vectors are stored complex even for real problems.
pub type State = DVector<Complex64>;

/// Relative tolerance for the structural self-adjointness check.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;

/// Relative eigen-residual accepted from the dense solver.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Build a complex state from real samples.
pub fn real_state(values: &[f64]) -> State {
    DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)))
}

/// Quadrature weights defining `<f|g> = sum_k w_k conj(f_k) g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProductSpace {
    weights: Vec<f64>,
}

impl InnerProductSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weights", "dimension must be positive"));
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param(
                "weights",
                format!("weight {k} is {} (must be finite and >= 0)", weights[k]),
            ));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::param("weights", "at least one weight must be positive"));
        }
        Ok(Self { weights })
    }

    pub fn uniform(dimension: usize, weight: f64) -> Result<Self> {
        Self::new(vec![weight; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_dim(&self, v: &State) -> Result<()> {
        if v.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn inner_product(&self, f: &State, g: &State) -> Result<Complex64> {
        self.check_dim(f)?;
        self.check_dim(g)?;
        Ok(self
            .weights
            .iter()
            .zip(f.iter().zip(g.iter()))
            .map(|(&w, (a, b))| a.conj() * b * w)
            .sum())
    }

    pub fn norm_squared(&self, f: &State) -> Result<f64> {
        self.check_dim(f)?;
        Ok(self
            .weights
            .iter()
            .zip(f.iter())
            .map(|(&w, a)| w * a.norm_sqr())
            .sum())
    }
}

/// `sum_k w_k conj(f_k) g_k`.
pub fn inner_product(f: &State, g: &State, space: &InnerProductSpace) -> Result<Complex64> {
    space.inner_product(f, g)
}

/// Dense matrix that is self-adjoint with respect to `space`.
///
/// Construction checks shapes only; [`HermitianOperator::check_self_adjoint`]
/// verifies `W A = (W A)^H` and is run before every eigensolve.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
    space: InnerProductSpace,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<Complex64>, space: InnerProductSpace) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() != space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: space.dimension(),
                found: matrix.nrows(),
            });
        }
        Ok(Self { matrix, space })
    }

    pub fn from_real(matrix: &DMatrix<f64>, space: InnerProductSpace) -> Result<Self> {
        Self::new(matrix.map(|v| Complex64::new(v, 0.0)), space)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn space(&self) -> &InnerProductSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, f: &State) -> Result<State> {
        self.space.check_dim(f)?;
        Ok(&self.matrix * f)
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|W A - (W A)^H|` relative to the largest entry of `W A`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dimension();
        let w = self.space.weights();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.matrix[(i, j)] * w[i];
                let b = (self.matrix[(j, i)] * w[j]).conj();
                worst = worst.max((a - b).norm());
                scale = scale.max(a.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn check_self_adjoint(&self) -> Result<()> {
        let residual = self.hermiticity_residual();
        if residual > SELF_ADJOINT_TOL {
            return Err(Error::NotSelfAdjoint {
                residual,
                tolerance: SELF_ADJOINT_TOL,
            });
        }
        Ok(())
    }

    /// Max of `|<f|A g> - <A f|g>|` over random pairs of unit vectors.
    pub fn random_self_adjointness_residual<R: Rng + ?Sized>(&self, pairs: usize, rng: &mut R) -> f64 {
        let n = self.dimension();
        let unit = |rng: &mut R| -> State {
            let v = State::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let norm = self.space.norm_squared(&v).unwrap_or(1.0).sqrt();
            v / Complex64::new(norm, 0.0)
        };
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let f = unit(rng);
            let g = unit(rng);
            let af = &self.matrix * &f;
            let ag = &self.matrix * &g;
            let lhs = self.space.inner_product(&f, &ag).unwrap_or_default();
            let rhs = self.space.inner_product(&af, &g).unwrap_or_default();
            worst = worst.max((lhs - rhs).norm());
        }
        worst
    }

    /// `<f|A f>`; real for self-adjoint `A`.
    pub fn expectation(&self, f: &State) -> Result<f64> {
        let af = self.apply(f)?;
        Ok(self.space.inner_product(f, &af)?.re)
    }

    /// `<A f|A f> = <f|A^2 f>`.
    pub fn second_moment(&self, f: &State) -> Result<f64> {
        let af = self.apply(f)?;
        self.space.norm_squared(&af)
    }

    /// Dense eigendecomposition. Rejects non-self-adjoint input and
    /// spaces with zero weights.
    pub fn eigenbasis(&self) -> Result<Eigenbasis> {
        self.check_self_adjoint()?;
        Eigenbasis::compute(self)
    }
}

/// Eigenvalues (ascending) and eigenvectors orthonormal under the operator's
/// inner product. Shared between decompositions of several initial states.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
    space: InnerProductSpace,
}

impl Eigenbasis {
    fn compute(op: &HermitianOperator) -> Result<Self> {
        let n = op.dimension();
        let w = op.space.weights();
        if let Some(k) = w.iter().position(|&x| x <= 0.0) {
            return Err(Error::param(
                "weights",
                format!("spectral decomposition needs positive weights (weight {k} is {})", w[k]),
            ));
        }
        let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();

        // B = W^{1/2} A W^{-1/2} is Hermitian in the plain inner product.
        let b = faer::Mat::<faer::complex_native::c64>::from_fn(n, n, |i, j| {
            let z = op.matrix[(i, j)] * (sqrt_w[i] / sqrt_w[j]);
            faer::complex_native::c64::new(z.re, z.im)
        });
        let evd = b.selfadjoint_eigendecomposition(faer::Side::Lower);
        let s = evd.s().column_vector();
        let u = evd.u();

        let mut order: Vec<usize> = (0..n).collect();
        let eig: Vec<f64> = (0..n).map(|k| s.read(k).re).collect();
        if let Some(k) = eig.iter().position(|v| !v.is_finite()) {
            return Err(Error::EigenSolver {
                dimension: n,
                detail: format!("non-finite eigenvalue at index {k}"),
            });
        }
        order.sort_by(|&a, &b| eig[a].total_cmp(&eig[b]));

        let mut vectors = DMatrix::<Complex64>::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &k) in order.iter().enumerate() {
            eigenvalues.push(eig[k]);
            let mut v: Vec<Complex64> = (0..n)
                .map(|i| {
                    let z = u.read(i, k);
                    Complex64::new(z.re, z.im)
                })
                .collect();
            normalize_phase(&mut v);
            for (i, z) in v.into_iter().enumerate() {
                vectors[(i, col)] = z / sqrt_w[i];
            }
        }

        let basis = Self {
            eigenvalues,
            vectors,
            space: op.space.clone(),
        };
        basis.check_residuals(op)?;
        Ok(basis)
    }

    // Spot-check `A v = lambda v` on a spread of columns; a full check is O(n^3).
    fn check_residuals(&self, op: &HermitianOperator) -> Result<()> {
        let n = self.eigenvalues.len();
        let scale = op.norm_inf().max(f64::MIN_POSITIVE);
        let samples = n.min(16);
        let mut worst: f64 = 0.0;
        let mut worst_col = 0;
        for s in 0..samples {
            let col = if samples == 1 { 0 } else { s * (n - 1) / (samples - 1) };
            let v = self.vectors.column(col).into_owned();
            let r = &op.matrix * &v - &v * Complex64::new(self.eigenvalues[col], 0.0);
            let res = self.space.norm_squared(&r)?.sqrt();
            if res > worst {
                worst = res;
                worst_col = col;
            }
        }
        if worst > EIGEN_RESIDUAL_TOL * scale {
            return Err(Error::EigenSolver {
                dimension: n,
                detail: format!(
                    "residual {worst:.3e} at column {worst_col} exceeds {:.3e} (checked {samples} columns)",
                    EIGEN_RESIDUAL_TOL * scale
                ),
            });
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn space(&self) -> &InnerProductSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest entry of `|V^H W V - I|`. O(n^3).
    pub fn gram_residual(&self) -> f64 {
        let w = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dimension(),
            self.space.weights().iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let gram = self.vectors.adjoint() * w * &self.vectors;
        let n = self.dimension();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Expansion coefficients `c_n = <n|initial>`.
    pub fn coefficients(&self, initial: &State) -> Result<Vec<Complex64>> {
        self.space.check_dim(initial)?;
        let weighted = DVector::from_iterator(
            initial.len(),
            initial
                .iter()
                .zip(self.space.weights())
                .map(|(z, &w)| z * w),
        );
        Ok(self.vectors.ad_mul(&weighted).iter().copied().collect())
    }

    pub fn decompose(self: &Arc<Self>, initial: &State) -> Result<SpectralDecomposition> {
        let coefficients = self.coefficients(initial)?;
        Ok(SpectralDecomposition {
            basis: Arc::clone(self),
            coefficients,
        })
    }
}

// First component above the noise floor is made real and positive.
fn normalize_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * max) {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// How expansion coefficients move in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evolution {
    /// `c_n -> c_n exp(-i lambda_n t)`
    Unitary,
    /// `c_n -> c_n exp(-lambda_n t)`, `t >= 0`
    Decaying,
}

/// An eigenbasis together with the expansion coefficients of one state.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    basis: Arc<Eigenbasis>,
    coefficients: Vec<Complex64>,
}

/// Eigendecompose `op` and expand `initial` in its eigenbasis.
pub fn spectral_decompose(op: &HermitianOperator, initial: &State) -> Result<SpectralDecomposition> {
    Arc::new(op.eigenbasis()?).decompose(initial)
}

impl SpectralDecomposition {
    /// Assemble from known spectral data; `vectors` must be orthonormal under `space`.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        vectors: DMatrix<Complex64>,
        coefficients: Vec<Complex64>,
        space: InnerProductSpace,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        for (len, what) in [
            (vectors.ncols(), "eigenvector count"),
            (coefficients.len(), "coefficient count"),
        ] {
            if len != n {
                return Err(Error::param(what, format!("{len} does not match {n} eigenvalues")));
            }
        }
        if vectors.nrows() != space.dimension() {
            return Err(Error::DimensionMismatch {
                expected: space.dimension(),
                found: vectors.nrows(),
            });
        }
        if eigenvalues.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::param("eigenvalues", "must be ascending"));
        }
        Ok(Self {
            basis: Arc::new(Eigenbasis {
                eigenvalues,
                vectors,
                space,
            }),
            coefficients,
        })
    }

    /// Spectral data in the standard basis: eigenvectors are unit vectors.
    pub fn from_spectrum(eigenvalues: Vec<f64>, coefficients: Vec<Complex64>) -> Result<Self> {
        let n = eigenvalues.len();
        Self::from_parts(
            eigenvalues,
            DMatrix::identity(n, n),
            coefficients,
            InnerProductSpace::uniform(n.max(1), 1.0)?,
        )
    }

    pub fn basis(&self) -> &Arc<Eigenbasis> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.basis.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.basis.vectors
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// `sum_n |c_n|^2`, the squared norm of the expanded state.
    pub fn norm0(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `sum_n |c_n|^2 lambda_n^k`.
    pub fn spectral_moment(&self, k: i32) -> f64 {
        self.coefficients
            .iter()
            .zip(self.eigenvalues())
            .map(|(c, &l)| c.norm_sqr() * l.powi(k))
            .sum()
    }

    pub fn evolved_coefficients(&self, t: f64, mode: Evolution) -> Result<Vec<Complex64>> {
        if mode == Evolution::Decaying && t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self
            .coefficients
            .iter()
            .zip(self.eigenvalues())
            .map(|(&c, &l)| c * propagator(l, t, mode))
            .collect())
    }

    pub fn reconstruct(&self) -> State {
        self.synthesize(&self.coefficients)
    }

    fn synthesize(&self, coefficients: &[Complex64]) -> State {
        &self.basis.vectors * DVector::from_column_slice(coefficients)
    }

    pub fn evolve(&self, t: f64, mode: Evolution) -> Result<State> {
        let c = self.evolved_coefficients(t, mode)?;
        Ok(self.synthesize(&c))
    }

    /// Complex autocorrelation `sum_n |c_n|^2 exp(-i lambda_n t)`.
    pub fn autocorrelation(&self, t: f64) -> Complex64 {
        self.coefficients
            .iter()
            .zip(self.eigenvalues())
            .map(|(c, &l)| c.norm_sqr() * Complex64::from_polar(1.0, -l * t))
            .sum()
    }

    /// `<psi|psi(t)>`: `sum |c_n|^2 cos(lambda_n t)` (unitary) or
    /// `sum |c_n|^2 exp(-lambda_n t)` (decaying).
    pub fn overlap(&self, t: f64, mode: Evolution) -> Result<f64> {
        match mode {
            Evolution::Unitary => Ok(self
                .coefficients
                .iter()
                .zip(self.eigenvalues())
                .map(|(c, &l)| c.norm_sqr() * (l * t).cos())
                .sum()),
            Evolution::Decaying => {
                if t < 0.0 {
                    return Err(Error::NegativeTime(t));
                }
                Ok(self
                    .coefficients
                    .iter()
                    .zip(self.eigenvalues())
                    .map(|(c, &l)| c.norm_sqr() * (-l * t).exp())
                    .sum())
            }
        }
    }

    /// `-d/dt <psi|psi(t)>` evaluated from the spectral sum.
    pub fn overlap_decay_rate(&self, t: f64, mode: Evolution) -> f64 {
        self.coefficients
            .iter()
            .zip(self.eigenvalues())
            .map(|(c, &l)| {
                let p = c.norm_sqr();
                match mode {
                    Evolution::Unitary => p * l * (l * t).sin(),
                    Evolution::Decaying => p * l * (-l * t).exp(),
                }
            })
            .sum()
    }

    /// `(<psi|psi>, <psi|exp(-A t)|psi>, <psi|A|psi>, <psi|A^2|psi>)` for a
    /// nonnegative generator, with eigenvalues in the roundoff band below
    /// zero treated as zero.
    pub fn decay_scalars(&self, t: f64) -> Result<(f64, f64, f64, f64)> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let mut out = (0.0, 0.0, 0.0, 0.0);
        for (c, &l) in self.coefficients.iter().zip(self.eigenvalues()) {
            let (p, l) = (c.norm_sqr(), l.max(0.0));
            out.0 += p;
            out.1 += p * (-l * t).exp();
            out.2 += p * l;
            out.3 += p * l * l;
        }
        Ok(out)
    }

    pub fn overlap_curve(&self, times: &[f64], mode: Evolution) -> Result<OverlapCurve> {
        let overlaps = times
            .iter()
            .map(|&t| self.overlap(t, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(OverlapCurve {
            times: times.to_vec(),
            overlaps,
            norm0: self.norm0(),
        })
    }
}

fn propagator(lambda: f64, t: f64, mode: Evolution) -> Complex64 {
    match mode {
        Evolution::Unitary => Complex64::from_polar(1.0, -lambda * t),
        Evolution::Decaying => Complex64::new((-lambda * t).exp(), 0.0),
    }
}

/// Apply [`SpectralDecomposition::evolve`].
pub fn evolve_spectral(decomp: &SpectralDecomposition, t: f64, mode: Evolution) -> Result<State> {
    decomp.evolve(t, mode)
}

/// Apply [`SpectralDecomposition::overlap_curve`].
pub fn overlap_curve(decomp: &SpectralDecomposition, times: &[f64], mode: Evolution) -> Result<OverlapCurve> {
    decomp.overlap_curve(times, mode)
}

/// Time-sampled `<psi|psi(t)>` together with `<psi|psi>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCurve {
    pub times: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub norm0: f64,
}

impl OverlapCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.overlaps.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn unit(n: usize, k: usize) -> State {
        State::from_fn(n, |i, _| if i == k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    #[test]
    fn inner_product_basis_vectors() {
        let space = InnerProductSpace::uniform(3, 1.0).unwrap();
        assert_eq!(inner_product(&unit(3, 0), &unit(3, 0), &space).unwrap(), Complex64::new(1.0, 0.0));
        let weighted = InnerProductSpace::new(vec![0.3, 2.0, 0.0]).unwrap();
        assert_eq!(inner_product(&unit(3, 0), &unit(3, 1), &weighted).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let space = InnerProductSpace::uniform(3, 1.0).unwrap();
        let err = space.inner_product(&unit(3, 0), &unit(4, 0)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, found: 4 });
    }

    #[test]
    fn weights_must_be_valid() {
        assert!(InnerProductSpace::new(vec![]).is_err());
        assert!(InnerProductSpace::new(vec![0.0, 0.0]).is_err());
        assert!(InnerProductSpace::new(vec![1.0, -0.1]).is_err());
        assert!(InnerProductSpace::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn conjugate_symmetry_and_positivity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let space = InnerProductSpace::new((0..6).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
        for _ in 0..50 {
            let f = State::from_fn(6, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let g = State::from_fn(6, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let fg = space.inner_product(&f, &g).unwrap();
            let gf = space.inner_product(&g, &f).unwrap();
            assert!((fg - gf.conj()).norm() < 1e-14);
            let ff = space.inner_product(&f, &f).unwrap();
            assert!(ff.re >= 0.0 && ff.im.abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let op = HermitianOperator::from_real(&m, InnerProductSpace::uniform(2, 1.0).unwrap()).unwrap();
        let d = spectral_decompose(&op, &unit(2, 1)).unwrap();
        assert_eq!(d.eigenvalues(), &[0.0, 2.0]);
        let v = d.eigenvectors();
        assert_abs_diff_eq!(v[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(1, 1)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[(1, 0)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn non_hermitian_rejected_before_factorization() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let op = HermitianOperator::from_real(&m, InnerProductSpace::uniform(2, 1.0).unwrap()).unwrap();
        assert!(matches!(op.eigenbasis(), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn weighted_self_adjoint_operator() {
        // A = W^{-1} S with S symmetric is self-adjoint under weights W.
        let w = vec![0.5, 2.0, 1.5];
        let s = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.3, -1.0, 1.0, 0.0, 0.3, 0.0, 4.0]);
        let a = DMatrix::from_fn(3, 3, |i, j| s[(i, j)] / w[i]);
        let space = InnerProductSpace::new(w).unwrap();
        let op = HermitianOperator::from_real(&a, space).unwrap();
        assert!(op.hermiticity_residual() < 1e-15);
        let psi = real_state(&[1.0, -0.5, 0.25]);
        let d = spectral_decompose(&op, &psi).unwrap();
        assert!(d.basis().gram_residual() < 1e-12);
        let back = d.reconstruct();
        assert!((back - &psi).norm() < 1e-12);
        assert_abs_diff_eq!(d.norm0(), op.space().norm_squared(&psi).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]);
        let op = HermitianOperator::from_real(&m, InnerProductSpace::uniform(2, 1.0).unwrap()).unwrap();
        let psi = real_state(&[0.6, 0.8]);
        let d = spectral_decompose(&op, &psi).unwrap();
        for mode in [Evolution::Unitary, Evolution::Decaying] {
            let out = d.evolve(0.0, mode).unwrap();
            assert!((out - &psi).norm() < 1e-14);
        }
    }

    #[test]
    fn unitary_phase_on_single_mode() {
        let d = SpectralDecomposition::from_spectrum(vec![1.0], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let c = d.evolved_coefficients(std::f64::consts::PI, Evolution::Unitary).unwrap();
        assert_abs_diff_eq!(c[0].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[0].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn decaying_two_level() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let d = SpectralDecomposition::from_spectrum(vec![0.0, 2.0], vec![Complex64::new(h, 0.0); 2]).unwrap();
        let c = d.evolved_coefficients(1.0, Evolution::Decaying).unwrap();
        assert_abs_diff_eq!(c[0].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1].re, (-2.0f64).exp() * h, epsilon = 1e-15);
        assert_eq!(d.evolve(-0.1, Evolution::Decaying).unwrap_err(), Error::NegativeTime(-0.1));
        assert!(d.overlap(-0.1, Evolution::Decaying).is_err());
    }

    #[test]
    fn overlap_curves_by_hand() {
        let stationary = SpectralDecomposition::from_spectrum(vec![0.0], vec![Complex64::new(0.7, 0.0)]).unwrap();
        let curve = stationary.overlap_curve(&[0.0, 1.0, 5.0], Evolution::Unitary).unwrap();
        assert!(curve.overlaps.iter().all(|&o| (o - 0.49).abs() < 1e-15));

        let omega = 1.7;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pair = SpectralDecomposition::from_spectrum(vec![-omega, omega], vec![Complex64::new(h, 0.0); 2]).unwrap();
        for t in [0.0, 0.3, 1.1, 4.0] {
            assert_abs_diff_eq!(pair.overlap(t, Evolution::Unitary).unwrap(), (omega * t).cos(), epsilon = 1e-14);
            assert!(pair.autocorrelation(t).im.abs() < 1e-14);
        }

        let empty = pair.overlap_curve(&[], Evolution::Unitary).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn random_residual_is_small_for_hermitian() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let n = 5;
        let a = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let op = HermitianOperator::new(h, InnerProductSpace::uniform(n, 1.0).unwrap()).unwrap();
        assert!(op.random_self_adjointness_residual(100, &mut rng) < 1e-9 * op.norm_inf());
    }
}
