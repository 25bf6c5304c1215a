//! Scenario files, runs, sweeps and report emission.
//!
//! A scenario is a TOML document naming one dynamical family, its
//! parameters and a time grid:
//!
//! ```toml
//! family = "liouville"
//!
//! [time]
//! start = 0.0
//! stop = 3.0
//! samples = 64
//!
//! [gaussian]
//! a = 2.0
//! b = 1.0
//!
//! [hamiltonian]
//! c = 1.0
//! d = 1.0
//! ```
//!
//! See the repository README for every section and its defaults.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{AuditSample, BoundInputs, BoundReport, Family};
use crate::error::{Error, Result};
use crate::fd::{Polynomial, StencilOrder};
use crate::fokker_planck::{build_hf, fp_to_schrodinger, DriftPotential, FpSpectral};
use crate::hilbert::{Evolution, OverlapCurve};
use crate::liouville::{
    build_liouvillian_with, gaussian_state, l_moment, power_state, stationarity_ratio, GaussianParams, HarmonicFlow,
    MomentOrder, PhaseGrid, SeparableHamiltonian, DEFAULT_DOMAIN_SIGMAS, STATIONARY_RATIO,
};
use crate::master::{MasterSpectral, TransitionMatrix};
use crate::quantum::QuantumSystem;

/// Fixed CSV header.
pub const CSV_HEADER: &str = "t,overlap,norm0,bound_name,tau,slack,valid";

/// Liouville states whose narrowest width spans fewer cells get a note.
const MIN_CELLS_PER_SIGMA: f64 = 2.0;

/// Sample times `start, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let n = self.samples;
        let step = (self.stop - self.start) / (n - 1) as f64;
        (0..n)
            .map(|k| if k + 1 == n { self.stop } else { self.start + k as f64 * step })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleConfig {
    pub gaussian: GaussianParams,
    pub c: f64,
    pub d: f64,
    pub alpha: Vec<f64>,
    pub points: usize,
    pub domain_sigmas: f64,
    pub stencil: StencilOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FpInitial {
    /// Normalized Gaussian density.
    Gaussian { mean: f64, sigma: f64 },
    /// `exp(-2W)`, normalized.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FokkerPlanckConfig {
    /// Coefficients of `W(x)`, constant term first.
    pub drift: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub initial: FpInitial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterConfig {
    /// Row-major `W`, acting as `dP/dt = -W P`.
    pub rates: Vec<Vec<f64>>,
    pub pi: Option<Vec<f64>>,
    pub p0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumConfig {
    pub hamiltonian: Vec<Vec<f64>>,
    pub hamiltonian_imag: Option<Vec<Vec<f64>>>,
    pub state: Vec<f64>,
    pub state_imag: Option<Vec<f64>>,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyConfig {
    Liouville(LiouvilleConfig),
    FokkerPlanck(FokkerPlanckConfig),
    Master(MasterConfig),
    Quantum(QuantumConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Replace the density power list with each value in turn.
    Alpha,
    /// Multiply the Gaussian `a` and `b` by each value.
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub time: TimeGrid,
    pub system: FamilyConfig,
    pub sweep: Option<SweepConfig>,
}

impl ScenarioConfig {
    pub fn family_name(&self) -> &'static str {
        match self.system {
            FamilyConfig::Liouville(_) => "liouville",
            FamilyConfig::FokkerPlanck(_) => "fokker_planck",
            FamilyConfig::Master(_) => "master",
            FamilyConfig::Quantum(_) => "quantum",
        }
    }
}

// Raw, unvalidated file contents.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    id: Option<String>,
    family: Option<String>,
    time: Option<RawTime>,
    gaussian: Option<RawGaussian>,
    hamiltonian: Option<RawHamiltonian>,
    liouville: Option<RawLiouville>,
    drift: Option<RawDrift>,
    initial: Option<RawInitial>,
    master: Option<RawMaster>,
    quantum: Option<RawQuantum>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    start: Option<f64>,
    stop: Option<f64>,
    samples: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussian {
    a: Option<f64>,
    b: Option<f64>,
    e: Option<f64>,
    f: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    c: Option<f64>,
    d: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLiouville {
    alpha: Option<Vec<f64>>,
    points: Option<i64>,
    domain_sigmas: Option<f64>,
    stencil: Option<StencilOrder>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    coefficients: Option<Vec<f64>>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    points: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Option<String>,
    mean: Option<f64>,
    sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaster {
    rates: Option<Vec<Vec<f64>>>,
    pi: Option<Vec<f64>>,
    p0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantum {
    hamiltonian: Option<Vec<Vec<f64>>>,
    hamiltonian_imag: Option<Vec<Vec<f64>>>,
    state: Option<Vec<f64>>,
    state_imag: Option<Vec<f64>>,
    hbar: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: Option<String>,
    values: Option<Vec<f64>>,
}

/// Collects every violation instead of stopping at the first.
#[derive(Default)]
struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    fn required<T>(&mut self, v: Option<T>, path: &str) -> Option<T> {
        if v.is_none() {
            self.push(format!("{path} is required"));
        }
        v
    }

    fn positive(&mut self, v: f64, path: &str) -> f64 {
        if !(v.is_finite() && v > 0.0) {
            self.push(format!("{path} must be > 0 (got {v})"));
        }
        v
    }

    fn finite(&mut self, v: f64, path: &str) -> f64 {
        if !v.is_finite() {
            self.push(format!("{path} must be finite (got {v})"));
        }
        v
    }

    fn count(&mut self, v: i64, min: i64, path: &str) -> usize {
        if v < min {
            self.push(format!("{path} must be >= {min} (got {v})"));
            return min as usize;
        }
        v as usize
    }

    fn unused(&mut self, present: bool, section: &str, family: &str) {
        if present {
            self.push(format!("[{section}] does not apply to family \"{family}\""));
        }
    }
}

const TOP_LEVEL_KEYS: &[&str] = &["id", "family"];

const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("time", &["start", "stop", "samples"]),
    ("gaussian", &["a", "b", "e", "f"]),
    ("hamiltonian", &["c", "d"]),
    ("liouville", &["alpha", "points", "domain_sigmas", "stencil"]),
    ("drift", &["coefficients", "x_min", "x_max", "points"]),
    ("initial", &["kind", "mean", "sigma"]),
    ("master", &["rates", "pi", "p0"]),
    ("quantum", &["hamiltonian", "hamiltonian_imag", "state", "state_imag", "hbar"]),
    ("sweep", &["parameter", "values"]),
];

// Unknown keys are reported alongside the other violations rather than
// aborting deserialization.
fn strip_unknown_keys(table: &mut toml::Table, v: &mut Violations) {
    table.retain(|key, value| {
        if TOP_LEVEL_KEYS.contains(&key) {
            return true;
        }
        let Some((_, allowed)) = SECTION_KEYS.iter().find(|(name, _)| *name == key) else {
            v.push(format!("{key}: unknown key"));
            return false;
        };
        if let toml::Value::Table(section) = value {
            section.retain(|k, _| {
                let known = allowed.contains(&k);
                if !known {
                    v.push(format!("{key}.{k}: unknown key"));
                }
                known
            });
        }
        true
    });
}

/// Read and validate a scenario file. The file stem is the default id.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario_str(&text, stem)
}

/// Validate scenario text, reporting all violations together.
pub fn parse_scenario_str(text: &str, default_id: &str) -> Result<ScenarioConfig> {
    let syntax = |e: toml::de::Error| Error::Config(vec![e.to_string().trim().to_string()]);
    let mut table: toml::Table = toml::from_str(text).map_err(syntax)?;
    let mut v = Violations::default();
    strip_unknown_keys(&mut table, &mut v);
    let raw: RawConfig = table.try_into().map_err(syntax)?;

    let id = raw.id.clone().unwrap_or_else(|| default_id.to_string());
    if id.is_empty() || id.contains(['/', '\\']) {
        v.push(format!("id must be a non-empty file-name-safe string (got {id:?})"));
    }

    let time = parse_time(raw.time.as_ref(), &mut v);
    let family = v.required(raw.family.clone(), "family");
    let system = match family.as_deref() {
        Some("liouville") => parse_liouville(&raw, &mut v).map(FamilyConfig::Liouville),
        Some("fokker_planck") => parse_fokker_planck(&raw, &mut v).map(FamilyConfig::FokkerPlanck),
        Some("master") => parse_master(&raw, &mut v).map(FamilyConfig::Master),
        Some("quantum") => parse_quantum(&raw, &mut v).map(FamilyConfig::Quantum),
        Some(other) => {
            v.push(format!(
                "family: unknown family \"{other}\" (expected liouville, fokker_planck, master or quantum)"
            ));
            None
        }
        None => None,
    };
    let sweep = raw.sweep.as_ref().and_then(|s| parse_sweep(s, family.as_deref(), &mut v));

    match (v.0.is_empty(), time, system) {
        (true, Some(time), Some(system)) => Ok(ScenarioConfig {
            id,
            time,
            system,
            sweep,
        }),
        _ => Err(Error::Config(v.0)),
    }
}

fn parse_time(raw: Option<&RawTime>, v: &mut Violations) -> Option<TimeGrid> {
    let Some(raw) = v.required(raw, "time") else {
        return None;
    };
    let start = v.required(raw.start, "time.start").map(|x| v.finite(x, "time.start"));
    let stop = v.required(raw.stop, "time.stop").map(|x| v.finite(x, "time.stop"));
    let samples = v.required(raw.samples, "time.samples").map(|n| v.count(n, 2, "time.samples"));
    if let Some(s) = start {
        if s < 0.0 {
            v.push(format!("time.start must be >= 0 (got {s})"));
        }
    }
    if let (Some(a), Some(b)) = (start, stop) {
        if b <= a {
            v.push(format!("time.stop must be > time.start (got {b} <= {a})"));
        }
    }
    Some(TimeGrid {
        start: start?,
        stop: stop?,
        samples: samples?,
    })
}

fn parse_liouville(raw: &RawConfig, v: &mut Violations) -> Option<LiouvilleConfig> {
    for (present, section) in [
        (raw.drift.is_some(), "drift"),
        (raw.initial.is_some(), "initial"),
        (raw.master.is_some(), "master"),
        (raw.quantum.is_some(), "quantum"),
    ] {
        v.unused(present, section, "liouville");
    }
    let g = v.required(raw.gaussian.as_ref(), "gaussian");
    let h = v.required(raw.hamiltonian.as_ref(), "hamiltonian");
    let lv = raw.liouville.as_ref();
    let gaussian = g.and_then(|g| {
        let a = v.required(g.a, "gaussian.a").map(|x| v.positive(x, "gaussian.a"));
        let b = v.required(g.b, "gaussian.b").map(|x| v.positive(x, "gaussian.b"));
        let e = v.finite(g.e.unwrap_or(0.0), "gaussian.e");
        let f = v.finite(g.f.unwrap_or(0.0), "gaussian.f");
        Some(GaussianParams { a: a?, b: b?, e, f })
    });
    let (c, d) = match h {
        Some(h) => (
            v.required(h.c, "hamiltonian.c").map(|x| v.positive(x, "hamiltonian.c")),
            v.required(h.d, "hamiltonian.d").map(|x| v.positive(x, "hamiltonian.d")),
        ),
        None => (None, None),
    };
    let alpha = lv.and_then(|l| l.alpha.clone()).unwrap_or_else(|| vec![1.0]);
    if alpha.is_empty() {
        v.push("liouville.alpha must not be empty");
    }
    for (k, &a) in alpha.iter().enumerate() {
        v.positive(a, &format!("liouville.alpha[{k}]"));
    }
    let points = v.count(lv.and_then(|l| l.points).unwrap_or(48), 8, "liouville.points");
    if points * points > crate::liouville::MAX_NODES {
        v.push(format!("liouville.points must be <= 64 (got {points})"));
    }
    let domain_sigmas = lv.and_then(|l| l.domain_sigmas).unwrap_or(DEFAULT_DOMAIN_SIGMAS);
    if !(domain_sigmas.is_finite() && domain_sigmas >= crate::liouville::GAUSSIAN_BOX_SIGMAS) {
        v.push(format!(
            "liouville.domain_sigmas must be >= {} (got {domain_sigmas})",
            crate::liouville::GAUSSIAN_BOX_SIGMAS
        ));
    }
    let stencil = lv.and_then(|l| l.stencil).unwrap_or_default();
    Some(LiouvilleConfig {
        gaussian: gaussian?,
        c: c?,
        d: d?,
        alpha,
        points,
        domain_sigmas,
        stencil,
    })
}

fn parse_fokker_planck(raw: &RawConfig, v: &mut Violations) -> Option<FokkerPlanckConfig> {
    for (present, section) in [
        (raw.gaussian.is_some(), "gaussian"),
        (raw.hamiltonian.is_some(), "hamiltonian"),
        (raw.liouville.is_some(), "liouville"),
        (raw.master.is_some(), "master"),
        (raw.quantum.is_some(), "quantum"),
    ] {
        v.unused(present, section, "fokker_planck");
    }
    let drift = v.required(raw.drift.as_ref(), "drift")?;
    let coeffs = v.required(drift.coefficients.clone(), "drift.coefficients");
    if let Some(c) = &coeffs {
        for (k, &x) in c.iter().enumerate() {
            v.finite(x, &format!("drift.coefficients[{k}]"));
        }
        let p = Polynomial::new(c.clone());
        match p.degree() {
            Some(d) if d >= 2 && d % 2 == 0 && p.leading() > 0.0 => {}
            _ => v.push("drift.coefficients must describe an even-degree (>= 2) polynomial with positive leading coefficient"),
        }
    }
    let x_min = v.finite(drift.x_min.unwrap_or(-8.0), "drift.x_min");
    let x_max = v.finite(drift.x_max.unwrap_or(8.0), "drift.x_max");
    if x_max <= x_min {
        v.push(format!("drift.x_max must be > drift.x_min (got {x_max} <= {x_min})"));
    }
    let points = v.count(drift.points.unwrap_or(256), 8, "drift.points");
    if points > 4096 {
        v.push(format!("drift.points must be <= 4096 (got {points})"));
    }
    let initial = match raw.initial.as_ref() {
        None => FpInitial::Gaussian { mean: 1.0, sigma: 0.5 },
        Some(init) => match init.kind.as_deref().unwrap_or("gaussian") {
            "gaussian" => FpInitial::Gaussian {
                mean: v.finite(init.mean.unwrap_or(1.0), "initial.mean"),
                sigma: v.positive(init.sigma.unwrap_or(0.5), "initial.sigma"),
            },
            "stationary" => FpInitial::Stationary,
            other => {
                v.push(format!("initial.kind: unknown kind \"{other}\" (expected gaussian or stationary)"));
                FpInitial::Stationary
            }
        },
    };
    Some(FokkerPlanckConfig {
        drift: coeffs?,
        x_min,
        x_max,
        points,
        initial,
    })
}

fn check_square(m: &[Vec<f64>], path: &str, v: &mut Violations) -> Option<usize> {
    let n = m.len();
    if n == 0 {
        v.push(format!("{path} must not be empty"));
        return None;
    }
    let mut ok = true;
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            v.push(format!("{path}[{i}] has {} entries, expected {n}", row.len()));
            ok = false;
        }
        for (j, x) in row.iter().enumerate() {
            if !x.is_finite() {
                v.push(format!("{path}[{i}][{j}] must be finite"));
                ok = false;
            }
        }
    }
    ok.then_some(n)
}

fn parse_master(raw: &RawConfig, v: &mut Violations) -> Option<MasterConfig> {
    for (present, section) in [
        (raw.gaussian.is_some(), "gaussian"),
        (raw.hamiltonian.is_some(), "hamiltonian"),
        (raw.liouville.is_some(), "liouville"),
        (raw.drift.is_some(), "drift"),
        (raw.initial.is_some(), "initial"),
        (raw.quantum.is_some(), "quantum"),
    ] {
        v.unused(present, section, "master");
    }
    let m = raw.master.as_ref();
    let rates = m
        .and_then(|m| m.rates.clone())
        .unwrap_or_else(|| vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    let p0 = m.and_then(|m| m.p0.clone()).unwrap_or_else(|| {
        let mut p = vec![0.0; rates.len().max(1)];
        p[0] = 1.0;
        p
    });
    let pi = m.and_then(|m| m.pi.clone());
    if let Some(n) = check_square(&rates, "master.rates", v) {
        let scale = rates.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
        for j in 0..n {
            let sum: f64 = (0..n).map(|i| rates[i][j]).sum();
            if sum.abs() > crate::master::COLUMN_SUM_TOL * scale {
                v.push(format!("master.rates column {j} must sum to 0 (sums to {sum:.3e})"));
            }
            for i in 0..n {
                if i != j && rates[i][j] > 0.0 {
                    v.push(format!("master.rates[{i}][{j}] must be <= 0 (got {})", rates[i][j]));
                }
            }
        }
        if p0.len() != n {
            v.push(format!("master.p0 has {} entries, expected {n}", p0.len()));
        }
        if let Some(pi) = &pi {
            if pi.len() != n {
                v.push(format!("master.pi has {} entries, expected {n}", pi.len()));
            }
        }
    }
    for (k, &p) in p0.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            v.push(format!("master.p0[{k}] must be >= 0 (got {p})"));
        }
    }
    let sum: f64 = p0.iter().sum();
    if (sum - 1.0).abs() > crate::master::PROBABILITY_SUM_TOL {
        v.push(format!("master.p0 must sum to 1 (sums to {sum})"));
    }
    if let Some(pi) = &pi {
        for (k, &p) in pi.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                v.push(format!("master.pi[{k}] must be > 0 (got {p})"));
            }
        }
    }
    Some(MasterConfig { rates, pi, p0 })
}

fn parse_quantum(raw: &RawConfig, v: &mut Violations) -> Option<QuantumConfig> {
    for (present, section) in [
        (raw.gaussian.is_some(), "gaussian"),
        (raw.hamiltonian.is_some(), "hamiltonian"),
        (raw.liouville.is_some(), "liouville"),
        (raw.drift.is_some(), "drift"),
        (raw.initial.is_some(), "initial"),
        (raw.master.is_some(), "master"),
    ] {
        v.unused(present, section, "quantum");
    }
    let q = raw.quantum.as_ref();
    let hamiltonian = q
        .and_then(|q| q.hamiltonian.clone())
        .unwrap_or_else(|| vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
    let hamiltonian_imag = q.and_then(|q| q.hamiltonian_imag.clone());
    let state = q.and_then(|q| q.state.clone()).unwrap_or_else(|| vec![1.0, 1.0]);
    let state_imag = q.and_then(|q| q.state_imag.clone());
    let hbar = v.positive(q.and_then(|q| q.hbar).unwrap_or(1.0), "quantum.hbar");
    if let Some(n) = check_square(&hamiltonian, "quantum.hamiltonian", v) {
        if n < 2 {
            v.push("quantum.hamiltonian must have at least 2 levels");
        }
        let im = hamiltonian_imag
            .as_ref()
            .and_then(|m| check_square(m, "quantum.hamiltonian_imag", v).map(|k| (m, k)));
        if let Some((_, k)) = im {
            if k != n {
                v.push(format!("quantum.hamiltonian_imag is {k}x{k}, expected {n}x{n}"));
            }
        }
        let scale = hamiltonian.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            for j in i..n {
                let re_bad = (hamiltonian[i][j] - hamiltonian[j][i]).abs() > 1e-12 * scale;
                let im_bad = match im {
                    Some((m, k)) if k == n => (m[i][j] + m[j][i]).abs() > 1e-12 * scale,
                    _ => false,
                };
                if re_bad || im_bad {
                    v.push(format!("quantum.hamiltonian must be Hermitian (entries [{i}][{j}] and [{j}][{i}] disagree)"));
                }
            }
        }
        if state.len() != n {
            v.push(format!("quantum.state has {} entries, expected {n}", state.len()));
        }
        if let Some(si) = &state_imag {
            if si.len() != n {
                v.push(format!("quantum.state_imag has {} entries, expected {n}", si.len()));
            }
        }
    }
    let norm: f64 = state.iter().chain(state_imag.iter().flatten()).map(|x| x * x).sum();
    if !(norm.is_finite() && norm > 0.0) {
        v.push("quantum.state must be a nonzero finite vector");
    }
    Some(QuantumConfig {
        hamiltonian,
        hamiltonian_imag,
        state,
        state_imag,
        hbar,
    })
}

fn parse_sweep(raw: &RawSweep, family: Option<&str>, v: &mut Violations) -> Option<SweepConfig> {
    let parameter = match v.required(raw.parameter.as_deref(), "sweep.parameter") {
        Some("alpha") => Some(SweepParameter::Alpha),
        Some("scale") => Some(SweepParameter::Scale),
        Some(other) => {
            v.push(format!("sweep.parameter: unknown parameter \"{other}\" (expected alpha or scale)"));
            None
        }
        None => None,
    };
    if parameter.is_some() && family.is_some_and(|f| f != "liouville") {
        v.push("sweep applies only to family \"liouville\"");
    }
    let values = v.required(raw.values.clone(), "sweep.values")?;
    if values.is_empty() {
        v.push("sweep.values must not be empty");
    }
    for (k, &x) in values.iter().enumerate() {
        v.positive(x, &format!("sweep.values[{k}]"));
    }
    Some(SweepConfig {
        parameter: parameter?,
        values,
    })
}

/// One named overlap curve of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub series: String,
    pub times: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub norm0: f64,
}

impl CurveRecord {
    fn from_curve(series: impl Into<String>, c: OverlapCurve) -> Self {
        Self {
            series: series.into(),
            times: c.times,
            overlaps: c.overlaps,
            norm0: c.norm0,
        }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ScenarioConfig,
    pub version: String,
    pub report: BoundReport,
    pub curves: Vec<CurveRecord>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn all_valid(&self) -> bool {
        self.report.all_valid()
    }
}

/// Build the operator, decompose, sample overlaps, evaluate and audit every
/// applicable bound.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunRecord> {
    let started = Instant::now();
    let times = cfg.time.times();
    let mut report = BoundReport::new(cfg.id.clone());
    let curves = match &cfg.system {
        FamilyConfig::Liouville(l) => run_liouville(l, &times, &mut report),
        FamilyConfig::FokkerPlanck(f) => run_fokker_planck(f, &times, &mut report),
        FamilyConfig::Master(m) => run_master(m, &times, &mut report),
        FamilyConfig::Quantum(q) => run_quantum(q, &cfg.time, &times, &mut report),
    }
    .map_err(|e| Error::Scenario {
        id: cfg.id.clone(),
        source: Box::new(e),
    })?;
    let record = RunRecord {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        report,
        curves,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    info!(
        "scenario {}: {} entries, {} validity violations, {} ordering violations",
        cfg.id,
        record.report.entries.len(),
        record.report.validity_violations,
        record.report.ordering_violations
    );
    Ok(record)
}

fn alpha_label(alpha: f64) -> String {
    format!("alpha={alpha}")
}

fn run_liouville(cfg: &LiouvilleConfig, times: &[f64], report: &mut BoundReport) -> Result<Vec<CurveRecord>> {
    let flow = HarmonicFlow::new(cfg.c, cfg.d)?;
    let h = SeparableHamiltonian::harmonic(cfg.c, cfg.d)?;
    // rho^alpha is wider than rho by 1/sqrt(alpha); widen the box for alpha < 1.
    let alpha_min = cfg.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_max = cfg.alpha.iter().copied().fold(0.0, f64::max);
    let sigmas = cfg.domain_sigmas * alpha_min.min(1.0).sqrt().recip();
    let grid = PhaseGrid::for_harmonic_orbit(&cfg.gaussian, &flow, cfg.points, sigmas)?;
    let ext = flow.orbit_extent(&cfg.gaussian);
    let cells = (ext.x_sigma_min / grid.dx()).min(ext.p_sigma_min / grid.dp()) / alpha_max.sqrt();
    if cells < MIN_CELLS_PER_SIGMA {
        report.notes.push(format!(
            "narrowest density width spans {cells:.2} grid cells; results are under-resolved"
        ));
    }
    let rho = gaussian_state(&grid, &cfg.gaussian)?;
    let l = build_liouvillian_with(&h, &grid, cfg.stencil)?;
    let space = grid.space();

    let mut basis = None;
    let mut curves = Vec::with_capacity(cfg.alpha.len());
    for &alpha in &cfg.alpha {
        let label = alpha_label(alpha);
        let state = power_state(&rho, alpha)?;
        let norm0 = space.norm_squared(&state)?;
        if stationarity_ratio(&state, &l)? <= STATIONARY_RATIO {
            report.add_stationary(Family::Classical, &label, times, norm0);
            curves.push(CurveRecord {
                series: label,
                times: times.to_vec(),
                overlaps: vec![norm0; times.len()],
                norm0,
            });
            continue;
        }
        let basis = match &basis {
            Some(b) => Arc::clone(b),
            None => {
                let b = Arc::new(l.eigenbasis()?);
                basis = Some(Arc::clone(&b));
                b
            }
        };
        let decomposition = basis.decompose(&state)?;
        let moment2 = l_moment(&state, &l, MomentOrder::Second)?;
        let moment1 = l_moment(&state, &l, MomentOrder::First)?;
        let curve = decomposition.overlap_curve(times, Evolution::Unitary)?;
        let samples: Vec<AuditSample> = curve
            .iter()
            .map(|(t, ov)| AuditSample {
                t,
                inputs: BoundInputs::new(curve.norm0, ov, moment1, moment2),
            })
            .collect();
        report.add_series(Family::Classical, &label, &samples);
        curves.push(CurveRecord::from_curve(label, curve));
    }
    Ok(curves)
}

fn run_fokker_planck(cfg: &FokkerPlanckConfig, times: &[f64], report: &mut BoundReport) -> Result<Vec<CurveRecord>> {
    let w = DriftPotential::new(Polynomial::new(cfg.drift.clone()), cfg.x_min, cfg.x_max, cfg.points)?;
    let p0 = match cfg.initial {
        FpInitial::Stationary => w.stationary_density(),
        FpInitial::Gaussian { mean, sigma } => {
            let raw = w.sample(|x| (-(x - mean).powi(2) / (2.0 * sigma * sigma)).exp());
            let mass = w.integrate(&raw);
            if !(mass > 0.0) {
                return Err(Error::param("initial", "Gaussian has no mass on the grid"));
            }
            raw.into_iter().map(|p| p / mass).collect()
        }
    };
    let psi0 = fp_to_schrodinger(&p0, &w)?;
    let hf = build_hf(&w)?;
    let spec = FpSpectral::new(&psi0, &hf)?;
    let mut samples = Vec::with_capacity(times.len());
    let mut overlaps = Vec::with_capacity(times.len());
    let mut norm0 = 0.0;
    for &t in times {
        let inputs = spec.inputs(t)?;
        norm0 = inputs.norm0;
        overlaps.push(inputs.overlap_t);
        samples.push(AuditSample {
            t,
            inputs: inputs.bound_inputs(),
        });
    }
    report.add_series(Family::FokkerPlanck, "", &samples);
    Ok(vec![CurveRecord {
        series: "psi".into(),
        times: times.to_vec(),
        overlaps,
        norm0,
    }])
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn run_master(cfg: &MasterConfig, times: &[f64], report: &mut BoundReport) -> Result<Vec<CurveRecord>> {
    let tm = TransitionMatrix::new(rows_to_matrix(&cfg.rates), cfg.pi.clone())?;
    let db = tm.detailed_balance();
    if !db.passes {
        let (i, j) = db.pair.unwrap_or((0, 0));
        return Err(Error::DetailedBalance {
            residual: db.residual,
            i,
            j,
        });
    }
    let spec = MasterSpectral::new(&tm, &cfg.p0)?;
    let mut samples = Vec::with_capacity(times.len());
    let mut plain = Vec::with_capacity(times.len());
    let mut q_frame = Vec::with_capacity(times.len());
    for &t in times {
        let inputs = spec.inputs(t)?;
        q_frame.push(inputs.overlap_t);
        plain.push(spec.plain_overlap(t)?);
        samples.push(AuditSample { t, inputs });
    }
    report.add_series(Family::Master, "", &samples);
    let q_norm0 = spec.inputs(0.0)?.norm0;
    Ok(vec![
        CurveRecord {
            series: "p".into(),
            times: times.to_vec(),
            overlaps: plain,
            norm0: cfg.p0.iter().map(|p| p * p).sum(),
        },
        CurveRecord {
            series: "q".into(),
            times: times.to_vec(),
            overlaps: q_frame,
            norm0: q_norm0,
        },
    ])
}

fn run_quantum(cfg: &QuantumConfig, grid: &TimeGrid, times: &[f64], report: &mut BoundReport) -> Result<Vec<CurveRecord>> {
    let n = cfg.hamiltonian.len();
    let h = DMatrix::from_fn(n, n, |i, j| {
        let im = cfg.hamiltonian_imag.as_ref().map_or(0.0, |m| m[i][j]);
        Complex64::new(cfg.hamiltonian[i][j], im)
    });
    let psi = DVector::from_fn(n, |i, _| {
        let im = cfg.state_imag.as_ref().map_or(0.0, |s| s[i]);
        Complex64::new(cfg.state[i], im)
    });
    let q = QuantumSystem::new(h, psi, cfg.hbar)?;
    let t_orth = q.orthogonalization_time(grid.stop);
    let overlaps: Vec<f64> = times.iter().map(|&t| q.autocorrelation(t).norm()).collect();
    let curve: Vec<(f64, f64)> = times.iter().copied().zip(overlaps.iter().copied()).collect();
    report.add_quantum("", q.energy_spread(), q.mean_energy(), cfg.hbar, t_orth, &curve);
    Ok(vec![CurveRecord {
        series: "abs_autocorrelation".into(),
        times: times.to_vec(),
        overlaps,
        norm0: 1.0,
    }])
}

/// Independent runs over one swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub id: String,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub runs: Vec<RunRecord>,
}

impl SweepRecord {
    pub fn all_valid(&self) -> bool {
        self.runs.iter().all(RunRecord::all_valid)
    }
}

/// Scenario variants for each sweep value, in order.
pub fn sweep_configs(cfg: &ScenarioConfig) -> Result<Vec<ScenarioConfig>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["sweep section is required for a sweep".into()]))?;
    let FamilyConfig::Liouville(base) = &cfg.system else {
        return Err(Error::Config(vec!["sweep applies only to family \"liouville\"".into()]));
    };
    Ok(sweep
        .values
        .iter()
        .map(|&value| {
            let mut l = base.clone();
            let tag = match sweep.parameter {
                SweepParameter::Alpha => {
                    l.alpha = vec![value];
                    format!("alpha={value}")
                }
                SweepParameter::Scale => {
                    l.gaussian = l.gaussian.scaled(value);
                    format!("scale={value}")
                }
            };
            ScenarioConfig {
                id: format!("{}-{tag}", cfg.id),
                time: cfg.time,
                system: FamilyConfig::Liouville(l),
                sweep: None,
            }
        })
        .collect())
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepRecord> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config(vec!["sweep section is required for a sweep".into()]))?;
    let runs = sweep_configs(cfg)?
        .iter()
        .map(run_scenario)
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRecord {
        id: cfg.id.clone(),
        parameter: sweep.parameter,
        values: sweep.values.clone(),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// One row per bound entry.
pub fn to_csv(record: &RunRecord) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for e in &record.report.entries {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.t,
            e.overlap,
            e.norm0,
            e.name,
            opt(e.tau),
            opt(e.slack),
            e.valid
        );
    }
    out
}

/// Write via a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Io(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::Io(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(format!("renaming {} to {}: {e}", tmp.display(), path.display()))
    })
}

/// Write `<dir>/<id>.<ext>` and return its path.
pub fn emit(record: &RunRecord, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    let path = dir.join(format!("{}.{}", record.config.id, format.extension()));
    let body = match format {
        OutputFormat::Json => to_json(record)?,
        OutputFormat::Csv => to_csv(record),
    };
    write_atomic(&path, &body)?;
    Ok(path)
}

/// JSON: one document for the whole sweep. CSV: one file per run.
pub fn emit_sweep(record: &SweepRecord, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    match format {
        OutputFormat::Json => {
            let path = dir.join(format!("{}.sweep.json", record.id));
            write_atomic(&path, &to_json(record)?)?;
            Ok(vec![path])
        }
        OutputFormat::Csv => record.runs.iter().map(|r| emit(r, dir, format)).collect(),
    }
}
