//! Finite-state master equations `dP/dt = -W P` obeying detailed balance.
//!
//! With `D = diag(pi)`, the matrix `S = D^{-1/2} W D^{1/2}`
//! (`S_ij = W_ij sqrt(pi_j / pi_i)`) is symmetric exactly when detailed
//! balance holds, and `P(t) = D^{1/2} exp(-S t) D^{-1/2} P0`.

use std::sync::Arc;

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundInputs;
use crate::error::{Error, Result};
use crate::hilbert::{real_state, Evolution, HermitianOperator, InnerProductSpace, OverlapCurve, SpectralDecomposition};

/// Column sums of `W` must vanish to this (relative to the largest rate).
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Detailed balance passes when `max |W_ij pi_j - W_ji pi_i|` is below this.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

/// Allowed deviation of a probability vector's sum from one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Supplied stationary distributions within this of unit sum are renormalized.
pub const PI_RENORMALIZE_TOL: f64 = 1e-9;

/// Negative probabilities down to this are roundoff and are clipped to zero.
pub const NEGATIVE_CLIP_TOL: f64 = 1e-12;

/// Singular values below this fraction of the largest count as null.
const NULL_SPACE_TOL: f64 = 1e-10;

/// Rate matrix with its stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rates: DMatrix<f64>,
    pi: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates conservation and sign structure. When `pi` is `None` it is
    /// taken from the one-dimensional null space of `W`.
    pub fn new(rates: DMatrix<f64>, pi: Option<Vec<f64>>) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || rates.ncols() != n {
            return Err(Error::param(
                "rates",
                format!("must be a non-empty square matrix, got {}x{}", rates.nrows(), rates.ncols()),
            ));
        }
        if rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("rates", "entries must be finite"));
        }
        let scale = rates.amax().max(1.0);
        for j in 0..n {
            let sum: f64 = rates.column(j).sum();
            if sum.abs() > COLUMN_SUM_TOL * scale {
                return Err(Error::param(
                    "rates",
                    format!("column {j} sums to {sum:.3e}; W must conserve probability"),
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && rates[(i, j)] > 0.0 {
                    return Err(Error::param(
                        "rates",
                        format!("off-diagonal entry ({i}, {j}) = {} must be <= 0", rates[(i, j)]),
                    ));
                }
            }
        }
        let pi = match pi {
            Some(p) => check_pi(p, n)?,
            None => null_vector(&rates)?,
        };
        Ok(Self { rates, pi })
    }

    /// Two states exchanging at rate `k` in both directions.
    pub fn two_state(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::param("k", "must be > 0"));
        }
        Self::new(DMatrix::from_row_slice(2, 2, &[k, -k, -k, k]), Some(vec![0.5, 0.5]))
    }

    /// Nearest-neighbour chain: `up[i]` is the rate `i -> i+1`, `down[i]` the
    /// rate `i+1 -> i`. The stationary distribution follows from
    /// `pi_{i+1} / pi_i = up[i] / down[i]`.
    pub fn birth_death(up: &[f64], down: &[f64]) -> Result<Self> {
        if up.len() != down.len() || up.is_empty() {
            return Err(Error::param("birth_death", "need equal, non-empty up and down rate lists"));
        }
        if up.iter().chain(down).any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::param("birth_death", "rates must be > 0"));
        }
        let n = up.len() + 1;
        let mut w = DMatrix::zeros(n, n);
        let mut pi = vec![1.0; n];
        for i in 0..n - 1 {
            w[(i + 1, i)] -= up[i];
            w[(i, i)] += up[i];
            w[(i, i + 1)] -= down[i];
            w[(i + 1, i + 1)] += down[i];
            pi[i + 1] = pi[i] * up[i] / down[i];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        Self::new(w, Some(pi))
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn detailed_balance(&self) -> DetailedBalanceReport {
        validate_detailed_balance(&self.rates, &self.pi)
    }
}

fn check_pi(mut pi: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pi.len(),
        });
    }
    if let Some(k) = pi.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::param("pi", format!("entry {k} = {} must be > 0", pi[k])));
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > PI_RENORMALIZE_TOL {
        return Err(Error::param("pi", format!("must sum to 1, sums to {sum}")));
    }
    if sum != 1.0 {
        debug!("renormalizing supplied stationary distribution (sum {sum})");
        pi.iter_mut().for_each(|p| *p /= sum);
    }
    Ok(pi)
}

fn null_vector(rates: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rates.nrows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let svd = rates.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("singular value decomposition returned no right vectors".into()))?;
    let sv = &svd.singular_values;
    let largest = sv.max();
    let null: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] <= NULL_SPACE_TOL * largest).collect();
    if null.len() != 1 {
        return Err(Error::param(
            "pi",
            format!(
                "W has a {}-dimensional null space, so the stationary distribution is not unique; supply pi",
                null.len()
            ),
        ));
    }
    let row = v_t.row(null[0]);
    let sum: f64 = row.sum();
    let pi: Vec<f64> = row.iter().map(|v| v / sum).collect();
    if let Some(k) = pi.iter().position(|p| *p <= 0.0) {
        return Err(Error::param("pi", format!("computed stationary entry {k} = {:.3e} is not positive", pi[k])));
    }
    Ok(pi)
}

/// Largest violation of `W_ij pi_j = W_ji pi_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailedBalanceReport {
    pub residual: f64,
    /// Pair attaining `residual`; `None` when every pair balances exactly.
    pub pair: Option<(usize, usize)>,
    pub passes: bool,
}

pub fn validate_detailed_balance(rates: &DMatrix<f64>, pi: &[f64]) -> DetailedBalanceReport {
    let n = pi.len().min(rates.nrows()).min(rates.ncols());
    let mut residual = 0.0;
    let mut pair = None;
    for i in 0..n {
        for j in i + 1..n {
            let r = (rates[(i, j)] * pi[j] - rates[(j, i)] * pi[i]).abs();
            if r > residual {
                residual = r;
                pair = Some((i, j));
            }
        }
    }
    let shapes_ok = rates.nrows() == pi.len() && rates.ncols() == pi.len();
    DetailedBalanceReport {
        residual,
        pair,
        passes: shapes_ok && residual < DETAILED_BALANCE_TOL,
    }
}

/// `S_ij = W_ij sqrt(pi_j / pi_i)` in the plain inner product.
pub fn symmetrize(tm: &TransitionMatrix) -> Result<HermitianOperator> {
    let report = tm.detailed_balance();
    if !report.passes {
        let (i, j) = report.pair.unwrap_or((0, 0));
        return Err(Error::DetailedBalance {
            residual: report.residual,
            i,
            j,
        });
    }
    let n = tm.n_states();
    let pi = tm.pi();
    let s = DMatrix::from_fn(n, n, |i, j| tm.rates[(i, j)] * (pi[j] / pi[i]).sqrt());
    let asym = (&s - s.transpose()).amax();
    let scale = s.amax().max(f64::MIN_POSITIVE);
    if asym > DETAILED_BALANCE_TOL * scale.max(1.0) {
        return Err(Error::NotSelfAdjoint {
            residual: asym,
            tolerance: DETAILED_BALANCE_TOL,
        });
    }
    let sym = (&s + s.transpose()) * 0.5;
    HermitianOperator::from_real(&sym, InnerProductSpace::uniform(n, 1.0)?)
}

/// Entries nonnegative and summing to one.
pub fn check_probability_vector(p: &[f64]) -> Result<()> {
    if let Some(k) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("p0", format!("entry {k} = {} must be >= 0", p[k])));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::param("p0", format!("must sum to 1, sums to {sum}")));
    }
    Ok(())
}

/// Initial distribution expanded in the eigenbasis of `S`, in the frame
/// `q = D^{-1/2} P`.
#[derive(Debug, Clone)]
pub struct MasterSpectral {
    decomposition: SpectralDecomposition,
    sqrt_pi: Vec<f64>,
    p0: Vec<f64>,
}

impl MasterSpectral {
    pub fn new(tm: &TransitionMatrix, p0: &[f64]) -> Result<Self> {
        if p0.len() != tm.n_states() {
            return Err(Error::DimensionMismatch {
                expected: tm.n_states(),
                found: p0.len(),
            });
        }
        check_probability_vector(p0)?;
        let s = symmetrize(tm)?;
        let basis = Arc::new(s.eigenbasis()?);
        let lowest = basis.eigenvalues()[0];
        let tol = 1e-10 * s.norm_inf().max(1.0);
        if lowest < -tol {
            return Err(Error::Numerical(format!("rate spectrum has negative eigenvalue {lowest:.3e}")));
        }
        let sqrt_pi: Vec<f64> = tm.pi().iter().map(|p| p.sqrt()).collect();
        let q: Vec<f64> = p0.iter().zip(&sqrt_pi).map(|(p, s)| p / s).collect();
        Ok(Self {
            decomposition: basis.decompose(&real_state(&q))?,
            sqrt_pi,
            p0: p0.to_vec(),
        })
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    /// Eigenvalues of `S` (equal to those of `W`), ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        self.decomposition.eigenvalues()
    }

    /// `P(t)`, with roundoff negatives clipped to zero.
    pub fn probabilities(&self, t: f64) -> Result<Vec<f64>> {
        let q = self.decomposition.evolve(t, Evolution::Decaying)?;
        let mut p: Vec<f64> = q.iter().zip(&self.sqrt_pi).map(|(z, s)| z.re * s).collect();
        for (k, v) in p.iter_mut().enumerate() {
            if *v < -NEGATIVE_CLIP_TOL {
                return Err(Error::Numerical(format!("probability {v:.3e} at state {k}, t = {t}")));
            }
            if *v < 0.0 {
                debug!("clipping probability {v:.3e} at state {k}, t = {t}");
                *v = 0.0;
            }
        }
        Ok(p)
    }

    /// Bound inputs in the symmetrized frame: `<q|q>`, `<q|exp(-St)|q>`,
    /// `<q|S|q>`, `<q|S^2|q>`.
    pub fn inputs(&self, t: f64) -> Result<BoundInputs> {
        let (norm0, overlap, m1, m2) = self.decomposition.decay_scalars(t)?;
        Ok(BoundInputs::new(norm0, overlap, m1, m2))
    }

    /// Plain `<P0|P(t)>`.
    pub fn plain_overlap(&self, t: f64) -> Result<f64> {
        Ok(self.probabilities(t)?.iter().zip(&self.p0).map(|(a, b)| a * b).sum())
    }
}

/// Overlap curve `<P0|P(t)>` (plain inner product) and the trajectory `P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterEvolution {
    pub curve: OverlapCurve,
    pub trajectory: Vec<Vec<f64>>,
}

pub fn evolve_master(tm: &TransitionMatrix, p0: &[f64], times: &[f64]) -> Result<MasterEvolution> {
    let spec = MasterSpectral::new(tm, p0)?;
    let mut trajectory = Vec::with_capacity(times.len());
    let mut overlaps = Vec::with_capacity(times.len());
    for &t in times {
        let p = spec.probabilities(t)?;
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            warn!("probability sum drifted to {sum} at t = {t}");
        }
        overlaps.push(p.iter().zip(p0).map(|(a, b)| a * b).sum());
        trajectory.push(p);
    }
    Ok(MasterEvolution {
        curve: OverlapCurve {
            times: times.to_vec(),
            overlaps,
            norm0: p0.iter().map(|v| v * v).sum(),
        },
        trajectory,
    })
}

/// Dense random chain with detailed balance by construction: random
/// stationary weights and symmetric conductances `K_ij`, with rate
/// `j -> i` equal to `K_ij / pi_j`.
pub fn random_detailed_balance_chain<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TransitionMatrix> {
    if n < 2 {
        return Err(Error::param("n_states", "need at least 2 states"));
    }
    let mut pi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let k: f64 = rng.gen_range(0.05..1.0);
            w[(i, j)] = -k / pi[j];
            w[(j, i)] = -k / pi[i];
        }
    }
    for j in 0..n {
        let out: f64 = (0..n).filter(|&i| i != j).map(|i| -w[(i, j)]).sum();
        w[(j, j)] = out;
    }
    TransitionMatrix::new(w, Some(pi))
}
