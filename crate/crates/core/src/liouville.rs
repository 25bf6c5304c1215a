//! Phase-space densities and the discrete Liouvillian `L = i{H, .}`.
//!
//! Grids cover one position and one momentum axis. Nodes sit strictly inside
//! `[min, max]`; the endpoints are implicit zero-Dirichlet nodes, so the
//! trapezoid rule reduces to the uniform weight `dx * dp` and the
//! antisymmetric derivative stencils make `L` exactly Hermitian.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{csl_ml_type, BoundInputs, Tau};
use crate::error::{Error, Result};
use crate::fd::{Polynomial, StencilOrder};
use crate::hilbert::{real_state, HermitianOperator, InnerProductSpace, State};

/// Largest phase-space grid accepted for dense operators (64 x 64).
pub const MAX_NODES: usize = 4096;

/// Boundary nodes of a valid density stay below this fraction of the peak.
pub const BOUNDARY_RATIO_TOL: f64 = 1e-10;

/// Allowed deviation of the quadrature mass from one.
pub const MASS_TOL: f64 = 1e-6;

/// Gaussians must fit their `+-6 sigma` box inside the grid.
pub const GAUSSIAN_BOX_SIGMAS: f64 = 6.0;

/// Default half-width of generated domains, in standard deviations.
pub const DEFAULT_DOMAIN_SIGMAS: f64 = 7.5;

/// `<L r|L r> <= STATIONARY_RATIO * ||L||^2 <r|r>` marks a discretely
/// stationary state.
pub const STATIONARY_RATIO: f64 = 1e-9;

/// Uniform phase-space mesh of `nx * np` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    x_min: f64,
    x_max: f64,
    p_min: f64,
    p_max: f64,
    nx: usize,
    np: usize,
}

impl PhaseGrid {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize) -> Result<Self> {
        if nx < 8 || np < 8 {
            return Err(Error::param("grid", format!("need at least 8 points per axis, got {nx}x{np}")));
        }
        if nx * np > MAX_NODES {
            return Err(Error::param(
                "grid",
                format!("{nx}x{np} nodes exceed the dense limit of {MAX_NODES}"),
            ));
        }
        for (lo, hi, axis) in [(x_min, x_max, "x"), (p_min, p_max, "p")] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::param(
                    format!("grid.{axis}"),
                    format!("need finite bounds with max > min, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(Self {
            x_min,
            x_max,
            p_min,
            p_max,
            nx,
            np,
        })
    }

    /// Box of `sigmas` standard deviations around a Gaussian.
    pub fn for_gaussian(g: &GaussianParams, points: usize, sigmas: f64) -> Result<Self> {
        let (sx, sp) = (g.sigma_x(), g.sigma_p());
        Self::new(
            g.e - sigmas * sx,
            g.e + sigmas * sx,
            g.f - sigmas * sp,
            g.f + sigmas * sp,
            points,
            points,
        )
    }

    /// Origin-centred box containing a Gaussian along its whole harmonic orbit.
    pub fn for_harmonic_orbit(g: &GaussianParams, flow: &HarmonicFlow, points: usize, sigmas: f64) -> Result<Self> {
        let ext = flow.orbit_extent(g);
        let hx = ext.x_center + sigmas * ext.x_sigma_max;
        let hp = ext.p_center + sigmas * ext.p_sigma_max;
        Self::new(-hx, hx, -hp, hp, points, points)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.p_min, self.p_max)
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx + 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j + 1) as f64 * self.dp()
    }

    /// Flat index; position is the slow axis.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.np + j
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn space(&self) -> InnerProductSpace {
        InnerProductSpace::uniform(self.len(), self.cell_area()).expect("grid has positive cell area")
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.np
    }

    /// Evaluate `f(x, p)` at every node in flat order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let xs: Vec<f64> = (0..self.nx).map(|i| self.x(i)).collect();
        let ps: Vec<f64> = (0..self.np).map(|j| self.p(j)).collect();
        let mut out = Vec::with_capacity(self.len());
        for &x in &xs {
            for &p in &ps {
                out.push(f(x, p));
            }
        }
        out
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_area()
    }
}

/// Parameters of `rho(x, p) = sqrt(ab)/pi exp(-a (x-e)^2 - b (p-f)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub f: f64,
}

impl GaussianParams {
    pub fn new(a: f64, b: f64, e: f64, f: f64) -> Result<Self> {
        let g = Self { a, b, e, f };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("gaussian.{name}"), "must be > 0"));
            }
        }
        for (name, v) in [("e", self.e), ("f", self.f)] {
            if !v.is_finite() {
                return Err(Error::param(format!("gaussian.{name}"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Standard deviation of the position marginal, `1/sqrt(2a)`.
    pub fn sigma_x(&self) -> f64 {
        (2.0 * self.a).sqrt().recip()
    }

    pub fn sigma_p(&self) -> f64 {
        (2.0 * self.b).sqrt().recip()
    }

    pub fn peak(&self) -> f64 {
        (self.a * self.b).sqrt() / PI
    }

    pub fn density(&self, x: f64, p: f64) -> f64 {
        let dx = x - self.e;
        let dp = p - self.f;
        self.peak() * (-self.a * dx * dx - self.b * dp * dp).exp()
    }

    /// Widths multiplied by `s` (both `a` and `b`), centre unchanged.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            ..*self
        }
    }
}

/// Nonnegative normalized density sampled on a [`PhaseGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl PhaseDistribution {
    /// Validates nonnegativity, unit mass and vanishing boundary values.
    pub fn new(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("density", format!("value {} at node {k} is not >= 0", values[k])));
        }
        let dist = Self { grid, values };
        let ratio = dist.boundary_ratio();
        if ratio >= BOUNDARY_RATIO_TOL {
            return Err(Error::DomainTooSmall(format!(
                "boundary density is {ratio:.3e} of the peak (limit {BOUNDARY_RATIO_TOL:e}); enlarge the domain"
            )));
        }
        let mass = dist.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Numerical(format!(
                "density mass {mass} differs from 1 by more than {MASS_TOL:e}; refine the grid"
            )));
        }
        Ok(dist)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Largest boundary-ring value over the largest value.
    pub fn boundary_ratio(&self) -> f64 {
        let max = self.max();
        if max == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.nx {
            for j in 0..self.grid.np {
                if self.grid.is_boundary(i, j) {
                    worst = worst.max(self.values[self.grid.index(i, j)]);
                }
            }
        }
        worst / max
    }

    pub fn to_state(&self) -> State {
        real_state(&self.values)
    }
}

/// Sample a Gaussian density, rejecting grids that do not contain its
/// `+-6 sigma` box.
pub fn gaussian_state(grid: &PhaseGrid, g: &GaussianParams) -> Result<PhaseDistribution> {
    g.validate()?;
    let (x_min, x_max, p_min, p_max) = grid.bounds();
    let k = GAUSSIAN_BOX_SIGMAS;
    let (sx, sp) = (g.sigma_x(), g.sigma_p());
    if g.e - k * sx < x_min || g.e + k * sx > x_max || g.f - k * sp < p_min || g.f + k * sp > p_max {
        return Err(Error::DomainTooSmall(format!(
            "the +-{k} sigma box [{:.4}, {:.4}] x [{:.4}, {:.4}] does not fit in [{x_min}, {x_max}] x [{p_min}, {p_max}]; use a larger domain",
            g.e - k * sx,
            g.e + k * sx,
            g.f - k * sp,
            g.f + k * sp
        )));
    }
    PhaseDistribution::new(*grid, grid.sample(|x, p| g.density(x, p)))
}

/// `H(x, p) = T(p) + V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableHamiltonian {
    kinetic: Polynomial,
    potential: Polynomial,
}

impl SeparableHamiltonian {
    pub fn new(kinetic: Polynomial, potential: Polynomial) -> Self {
        Self { kinetic, potential }
    }

    /// `H = d p^2 + c x^2`, i.e. `d = 1/(2m)`, `c = m w^2 / 2`.
    pub fn harmonic(c: f64, d: f64) -> Result<Self> {
        HarmonicFlow::new(c, d)?;
        Ok(Self::new(Polynomial::new(vec![0.0, 0.0, d]), Polynomial::new(vec![0.0, 0.0, c])))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Polynomial::new(vec![value]), Polynomial::zero())
    }

    pub fn kinetic(&self) -> &Polynomial {
        &self.kinetic
    }

    pub fn potential(&self) -> &Polynomial {
        &self.potential
    }

    /// `(c, d)` when this is `d p^2 + c x^2` with `c, d > 0`.
    pub fn harmonic_params(&self) -> Option<(f64, f64)> {
        match (self.potential.coeffs(), self.kinetic.coeffs()) {
            ([z0, z1, c], [w0, w1, d]) if *z0 == 0.0 && *z1 == 0.0 && *w0 == 0.0 && *w1 == 0.0 && *c > 0.0 && *d > 0.0 => {
                Some((*c, *d))
            }
            _ => None,
        }
    }

    pub fn energy(&self, x: f64, p: f64) -> f64 {
        self.kinetic.eval(p) + self.potential.eval(x)
    }
}

/// Matrix of `i{H, .}` with the default sixth-order stencil.
pub fn build_liouvillian(h: &SeparableHamiltonian, grid: &PhaseGrid) -> Result<HermitianOperator> {
    build_liouvillian_with(h, grid, StencilOrder::default())
}

/// Matrix of `i{H, .} = i (V'(x) d/dp - T'(p) d/dx)` using antisymmetric
/// centred differences with zero closure.
///
/// The grid spacing must resolve the states the operator will act on; that
/// is the caller's responsibility.
pub fn build_liouvillian_with(h: &SeparableHamiltonian, grid: &PhaseGrid, order: StencilOrder) -> Result<HermitianOperator> {
    let n = grid.len();
    let (nx, np) = (grid.nx(), grid.np());
    let dv = h.potential().derivative();
    let dt = h.kinetic().derivative();
    let force: Vec<f64> = (0..nx).map(|i| dv.eval(grid.x(i))).collect();
    let velocity: Vec<f64> = (0..np).map(|j| dt.eval(grid.p(j))).collect();
    let (hx, hp) = (grid.dx(), grid.dp());

    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..nx {
        for j in 0..np {
            let row = grid.index(i, j);
            for (k, &c) in order.first_derivative().iter().enumerate() {
                let s = k + 1;
                // i V'(x) d/dp
                let wp = c * force[i] / hp;
                if j + s < np {
                    m[(row, grid.index(i, j + s))] += Complex64::new(0.0, wp);
                }
                if j >= s {
                    m[(row, grid.index(i, j - s))] -= Complex64::new(0.0, wp);
                }
                // -i T'(p) d/dx
                let wx = c * velocity[j] / hx;
                if i + s < nx {
                    m[(row, grid.index(i + s, j))] -= Complex64::new(0.0, wx);
                }
                if i >= s {
                    m[(row, grid.index(i - s, j))] += Complex64::new(0.0, wx);
                }
            }
        }
    }
    HermitianOperator::new(m, grid.space())
}

/// Pointwise `rho^alpha`, not renormalized.
pub fn power_state(rho: &PhaseDistribution, alpha: f64) -> Result<State> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param(
            "alpha",
            format!("must be > 0 (got {alpha}); non-positive powers of a decaying density are not square-integrable"),
        ));
    }
    Ok(real_state(&rho.values().iter().map(|v| v.powf(alpha)).collect::<Vec<_>>()))
}

/// Which Liouvillian moment to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    /// `<r|L|r>`, zero for real `r`.
    First,
    /// `<L r|L r> = <r|L^2|r>`.
    Second,
}

pub fn l_moment(rho_alpha: &State, l: &HermitianOperator, order: MomentOrder) -> Result<f64> {
    if let Some(k) = rho_alpha.iter().position(|z| z.im != 0.0) {
        return Err(Error::param("state", format!("must be real-valued (node {k} has imaginary part)")));
    }
    match order {
        MomentOrder::First => l.expectation(rho_alpha),
        MomentOrder::Second => l.second_moment(rho_alpha),
    }
}

/// `<L r|L r> / (||L||_inf^2 <r|r>)`: how far a state is from discrete
/// stationarity, on the scale of the operator.
pub fn stationarity_ratio(state: &State, l: &HermitianOperator) -> Result<f64> {
    let norm = l.space().norm_squared(state)?;
    let scale = l.norm_inf().powi(2) * norm;
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(l.second_moment(state)? / scale)
}

/// `<r|L^2|r>` for a Gaussian under `H = d p^2 + c x^2`:
/// `[(ad - bc)^2 + 4 a^2 b d^2 f^2 + 4 a b^2 c^2 e^2] / (2 pi sqrt(ab))`.
pub fn harmonic_l2_closed_form(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> f64 {
    let cross = a * d - b * c;
    (cross * cross + 4.0 * a * a * b * d * d * f * f + 4.0 * a * b * b * c * c * e * e) / (2.0 * PI * (a * b).sqrt())
}

/// Exact phase-space rotation generated by `H = d p^2 + c x^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFlow {
    pub c: f64,
    pub d: f64,
}

/// Reach of a Gaussian over one orbit: centre radius and largest standard
/// deviation along each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitExtent {
    pub x_center: f64,
    pub x_sigma_max: f64,
    pub x_sigma_min: f64,
    pub p_center: f64,
    pub p_sigma_max: f64,
    pub p_sigma_min: f64,
}

impl HarmonicFlow {
    pub fn new(c: f64, d: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("d", d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("hamiltonian.{name}"), "must be > 0"));
            }
        }
        Ok(Self { c, d })
    }

    /// Angular frequency `2 sqrt(cd)`.
    pub fn omega(&self) -> f64 {
        2.0 * (self.c * self.d).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    fn ratio(&self) -> f64 {
        (self.d / self.c).sqrt()
    }

    /// Solution of `x' = 2 d p`, `p' = -2 c x` after time `t`.
    pub fn forward(&self, x: f64, p: f64, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega() * t).sin_cos();
        let r = self.ratio();
        (x * c + r * p * s, p * c - x / r * s)
    }

    pub fn backward(&self, x: f64, p: f64, t: f64) -> (f64, f64) {
        self.forward(x, p, -t)
    }

    pub fn orbit_extent(&self, g: &GaussianParams) -> OrbitExtent {
        let r = self.ratio();
        let (sx, sp) = (g.sigma_x(), g.sigma_p());
        OrbitExtent {
            x_center: g.e.hypot(r * g.f),
            x_sigma_max: sx.max(r * sp),
            x_sigma_min: sx.min(r * sp),
            p_center: g.f.hypot(g.e / r),
            p_sigma_max: sp.max(sx / r),
            p_sigma_min: sp.min(sx / r),
        }
    }
}

/// Evolve a Gaussian exactly by carrying each node back along the flow,
/// `rho(z, t) = rho(Phi_{-t}(z), 0)`.
pub fn harmonic_evolve_exact(g: &GaussianParams, flow: &HarmonicFlow, t: f64, grid: &PhaseGrid) -> Result<PhaseDistribution> {
    g.validate()?;
    PhaseDistribution::new(
        *grid,
        grid.sample(|x, p| {
            let (x0, p0) = flow.backward(x, p, t);
            g.density(x0, p0)
        }),
    )
}

/// Quadrature of `rho0^alpha * rho(t)^alpha` with `rho(t)` from the exact flow.
pub fn harmonic_overlap_oracle(g: &GaussianParams, flow: &HarmonicFlow, alpha: f64, grid: &PhaseGrid, t: f64) -> f64 {
    let values = grid.sample(|x, p| {
        let (x0, p0) = flow.backward(x, p, t);
        (g.density(x, p) * g.density(x0, p0)).powf(alpha)
    });
    grid.integrate(&values)
}

/// Grid settings for [`single_particle_limit_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub points: usize,
    pub sigmas: f64,
    /// Refuse scales whose narrowest width spans fewer cells than this.
    pub min_cells_per_sigma: f64,
    pub order: StencilOrder,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            points: 48,
            sigmas: DEFAULT_DOMAIN_SIGMAS,
            min_cells_per_sigma: 3.0,
            order: StencilOrder::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub scale: f64,
    /// ML-type bound at the scan time; `None` when refused.
    pub bound: Option<f64>,
    pub stationary: bool,
    pub refused: Option<String>,
}

/// ML-type classical bound for `a -> s a`, `b -> s b` at a fixed time.
///
/// `<r|L^2|r>` comes from the discrete Liouvillian; the overlap at `t` from
/// the exact harmonic flow sampled on the same grid, which avoids one dense
/// eigensolve per scale.
pub fn single_particle_limit_scan(
    base: &GaussianParams,
    flow: &HarmonicFlow,
    t: f64,
    scales: &[f64],
    settings: &ScanSettings,
) -> Result<Vec<ScanEntry>> {
    let h = SeparableHamiltonian::harmonic(flow.c, flow.d)?;
    let mut out = Vec::with_capacity(scales.len());
    for &s in scales {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::param("scale", format!("must be > 0, got {s}")));
        }
        let g = base.scaled(s);
        let grid = PhaseGrid::for_harmonic_orbit(&g, flow, settings.points, settings.sigmas)?;
        let ext = flow.orbit_extent(&g);
        let cells = (ext.x_sigma_min / grid.dx()).min(ext.p_sigma_min / grid.dp());
        if cells < settings.min_cells_per_sigma {
            out.push(ScanEntry {
                scale: s,
                bound: None,
                stationary: false,
                refused: Some(format!(
                    "under-resolved: narrowest width spans {cells:.2} cells (< {})",
                    settings.min_cells_per_sigma
                )),
            });
            continue;
        }
        let rho = gaussian_state(&grid, &g)?;
        let l = build_liouvillian_with(&h, &grid, settings.order)?;
        let state = rho.to_state();
        let norm0 = grid.space().norm_squared(&state)?;
        if stationarity_ratio(&state, &l)? <= STATIONARY_RATIO {
            out.push(ScanEntry {
                scale: s,
                bound: Some(0.0),
                stationary: true,
                refused: None,
            });
            continue;
        }
        let moment2 = l_moment(&state, &l, MomentOrder::Second)?;
        let overlap = harmonic_overlap_oracle(&g, flow, 1.0, &grid, t);
        let tau = csl_ml_type(&BoundInputs::new(norm0, overlap, 0.0, moment2))?;
        out.push(ScanEntry {
            scale: s,
            bound: tau.value(),
            stationary: matches!(tau, Tau::Stationary),
            refused: None,
        });
    }
    Ok(out)
}
