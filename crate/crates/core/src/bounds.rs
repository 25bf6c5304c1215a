//! Speed-limit formulas and the validity/tightness audit.
//!
//! All bounds consume the same handful of scalars: the squared norm of the
//! initial state, its overlap with the evolved state, and the first and
//! second moments of the generator. Degenerate physics (stationary states,
//! eigenstates) is reported through [`Tau`] rather than as an error so that
//! sweeps never abort half way.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `t - tau` below this counts as a violated bound.
pub const VALIDITY_TOL: f64 = 1e-9;

/// Numerator and generator moment both below this: the state does not move.
pub const STATIONARY_TOL: f64 = 1e-12;

/// Largest excursion of `overlap / norm0` outside `[-1, 1]` absorbed by clamping.
pub const CLAMP_TOL: f64 = 1e-9;

/// Slack allowed in the classical ordering check (relative to the ML value).
pub const ORDERING_TOL: f64 = 1e-12;

/// Why a bound does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoBoundReason {
    /// Energy spread vanishes: an eigenstate never becomes orthogonal.
    ZeroSpread,
    /// Mean energy is not positive; shift the ground energy to zero.
    NonPositiveMeanEnergy,
}

impl fmt::Display for NoBoundReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoBoundReason::ZeroSpread => write!(f, "zero energy spread: eigenstates never orthogonalize"),
            NoBoundReason::NonPositiveMeanEnergy => {
                write!(f, "mean energy <= 0: measure energies from the ground state")
            }
        }
    }
}

/// A lower bound on elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau {
    Finite(f64),
    /// Nothing moves; the bound is the vacuous zero.
    Stationary,
    NoBound(NoBoundReason),
}

impl Tau {
    /// Numeric value; `Stationary` is zero, `NoBound` has none.
    pub fn value(&self) -> Option<f64> {
        match *self {
            Tau::Finite(v) => Some(v),
            Tau::Stationary => Some(0.0),
            Tau::NoBound(_) => None,
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, Tau::Stationary)
    }

    /// The larger of two bounds; a bound beats no bound.
    pub fn max(self, other: Tau) -> Tau {
        match (self.value(), other.value()) {
            (Some(a), Some(b)) => {
                if self.is_stationary() && other.is_stationary() {
                    Tau::Stationary
                } else {
                    Tau::Finite(a.max(b))
                }
            }
            (Some(_), None) => self,
            (None, Some(_)) => other,
            (None, None) => self,
        }
    }
}

/// Scalars every bound is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `<psi|psi>`
    pub norm0: f64,
    /// `<psi|psi(t)>`
    pub overlap_t: f64,
    /// `<psi|G|psi>` (zero for Liouvillians).
    pub moment1: f64,
    /// `<psi|G^2|psi>`
    pub moment2: f64,
    pub hbar: f64,
}

impl BoundInputs {
    pub fn new(norm0: f64, overlap_t: f64, moment1: f64, moment2: f64) -> Self {
        Self {
            norm0,
            overlap_t,
            moment1,
            moment2,
            hbar: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("norm0", self.norm0),
            ("overlap_t", self.overlap_t),
            ("moment1", self.moment1),
            ("moment2", self.moment2),
        ] {
            if !v.is_finite() {
                return Err(Error::BoundInput(format!("{name} is not finite ({v})")));
            }
        }
        if self.norm0 <= 0.0 {
            return Err(Error::BoundInput(format!("norm0 must be > 0, got {}", self.norm0)));
        }
        if self.moment2 < 0.0 {
            return Err(Error::BoundInput(format!("moment2 must be >= 0, got {}", self.moment2)));
        }
        if self.overlap_t - self.norm0 > CLAMP_TOL * self.norm0 {
            return Err(Error::BoundInput(format!(
                "overlap {} exceeds norm {}; a spectral sum cannot exceed the norm",
                self.overlap_t, self.norm0
            )));
        }
        Ok(())
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::BoundInput(format!("hbar must be > 0, got {hbar}")));
    }
    Ok(())
}

/// Mandelstam-Tamm: `pi hbar / (2 dE)`.
pub fn qsl_mt(delta_e: f64, hbar: f64) -> Result<Tau> {
    check_hbar(hbar)?;
    if !(delta_e >= 0.0) || !delta_e.is_finite() {
        return Err(Error::BoundInput(format!("energy spread must be >= 0, got {delta_e}")));
    }
    if delta_e == 0.0 {
        return Ok(Tau::NoBound(NoBoundReason::ZeroSpread));
    }
    Ok(Tau::Finite(PI * hbar / (2.0 * delta_e)))
}

/// Margolus-Levitin: `pi hbar / (2 E)` with `E` measured from the ground state.
pub fn qsl_ml(mean_e: f64, hbar: f64) -> Result<Tau> {
    check_hbar(hbar)?;
    if !mean_e.is_finite() {
        return Err(Error::BoundInput(format!("mean energy is not finite ({mean_e})")));
    }
    if mean_e <= 0.0 {
        return Ok(Tau::NoBound(NoBoundReason::NonPositiveMeanEnergy));
    }
    Ok(Tau::Finite(PI * hbar / (2.0 * mean_e)))
}

/// `max(MT, ML)`.
pub fn qsl_combined(delta_e: f64, mean_e: f64, hbar: f64) -> Result<Tau> {
    Ok(qsl_mt(delta_e, hbar)?.max(qsl_ml(mean_e, hbar)?))
}

// Shared zero-over-zero handling for the classical forms.
fn classical_numerator(input: &BoundInputs) -> Result<Option<f64>> {
    input.check()?;
    let numerator = (input.norm0 - input.overlap_t).max(0.0);
    if input.moment2 < STATIONARY_TOL {
        if numerator < STATIONARY_TOL {
            return Ok(None);
        }
        return Err(Error::BoundInput(format!(
            "overlap dropped by {numerator:.3e} while the generator moment is {:.3e}",
            input.moment2
        )));
    }
    Ok(Some(numerator))
}

/// Classical Margolus-Levitin type:
/// `sqrt(2 (<r|r> - <r|r(t)>) / <r|L^2|r>)`.
pub fn csl_ml_type(input: &BoundInputs) -> Result<Tau> {
    Ok(match classical_numerator(input)? {
        None => Tau::Stationary,
        Some(num) => Tau::Finite((2.0 * num / input.moment2).sqrt()),
    })
}

/// Classical Mandelstam-Tamm type:
/// `arccos(<r|r(t)>/<r|r>) / sqrt(<r|L^2|r>/<r|r>)`.
pub fn csl_mt_type(input: &BoundInputs) -> Result<Tau> {
    if classical_numerator(input)?.is_none() {
        return Ok(Tau::Stationary);
    }
    let ratio = clamp_ratio(input.overlap_t / input.norm0)?;
    Ok(Tau::Finite(ratio.acos() * (input.norm0 / input.moment2).sqrt()))
}

fn clamp_ratio(ratio: f64) -> Result<f64> {
    if ratio > 1.0 || ratio < -1.0 {
        let excess = ratio.abs() - 1.0;
        if excess > CLAMP_TOL {
            return Err(Error::BoundInput(format!("overlap ratio {ratio} outside [-1, 1]")));
        }
        log::debug!("clamped overlap ratio {ratio} by {excess:.3e}");
        return Ok(ratio.clamp(-1.0, 1.0));
    }
    Ok(ratio)
}

fn decaying_check(input: &BoundInputs) -> Result<()> {
    input.check()?;
    if input.overlap_t <= 0.0 {
        return Err(Error::BoundInput(format!(
            "overlap {} must stay positive under decaying evolution",
            input.overlap_t
        )));
    }
    Ok(())
}

/// Imaginary-time Margolus-Levitin type:
/// `(log <p|p> - log <p|p(t)>) / (<p|H|p>/<p|p>)`.
pub fn fp_ml_type(input: &BoundInputs) -> Result<Tau> {
    decaying_check(input)?;
    let log_drop = (input.norm0 / input.overlap_t).ln();
    if input.moment1 < STATIONARY_TOL {
        if log_drop < STATIONARY_TOL {
            return Ok(Tau::Stationary);
        }
        return Err(Error::BoundInput(format!(
            "overlap decayed (log drop {log_drop:.3e}) with mean generator {:.3e}",
            input.moment1
        )));
    }
    Ok(Tau::Finite((log_drop * input.norm0 / input.moment1).max(0.0)))
}

/// Imaginary-time Mandelstam-Tamm type:
/// `2 (sqrt<p|p> - sqrt<p|p(t)>) / sqrt<p|H^2|p>`.
pub fn fp_mt_type(input: &BoundInputs) -> Result<Tau> {
    decaying_check(input)?;
    let drop = input.norm0.sqrt() - input.overlap_t.sqrt();
    if input.moment2 < STATIONARY_TOL {
        if drop.abs() < STATIONARY_TOL {
            return Ok(Tau::Stationary);
        }
        return Err(Error::BoundInput(format!(
            "overlap decayed by {drop:.3e} with second moment {:.3e}",
            input.moment2
        )));
    }
    Ok(Tau::Finite((2.0 * drop / input.moment2.sqrt()).max(0.0)))
}

/// `max(fp_ml_type, fp_mt_type)`.
pub fn fp_combined(input: &BoundInputs) -> Result<Tau> {
    Ok(fp_ml_type(input)?.max(fp_mt_type(input)?))
}

/// Master-equation bound; identical in form to [`fp_combined`] with
/// transition-matrix moments.
pub fn master_bound(input: &BoundInputs) -> Result<Tau> {
    fp_combined(input)
}

/// Which formulas apply to a series of samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Liouville dynamics: `csl_ml`, `csl_mt`.
    Classical,
    /// Fokker-Planck imaginary time: `fp_ml`, `fp_mt`, `fp_combined`.
    FokkerPlanck,
    /// Master equation: `master_ml`, `master_mt`, `master`.
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSample {
    pub t: f64,
    pub inputs: BoundInputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Regular,
    Stationary,
    NoBound,
    InputError,
}

/// One bound evaluated at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub t: f64,
    pub name: String,
    pub tau: Option<f64>,
    pub status: BoundStatus,
    /// `t - tau`
    pub slack: Option<f64>,
    pub valid: bool,
    pub overlap: f64,
    pub norm0: f64,
}

/// MT-type over ML-type ratio at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub t: f64,
    pub series: String,
    pub mt_over_ml: Option<f64>,
}

/// Every bound of a scenario across its time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scenario_id: String,
    pub entries: Vec<BoundEntry>,
    pub tightness: Vec<Tightness>,
    pub validity_violations: usize,
    pub ordering_violations: usize,
    pub input_errors: usize,
    pub notes: Vec<String>,
}

fn series_name(base: &str, series: &str) -> String {
    if series.is_empty() {
        base.to_string()
    } else {
        format!("{base}[{series}]")
    }
}

impl BoundReport {
    pub fn new(scenario_id: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            entries: Vec::new(),
            tightness: Vec::new(),
            validity_violations: 0,
            ordering_violations: 0,
            input_errors: 0,
            notes: Vec::new(),
        }
    }

    pub fn all_valid(&self) -> bool {
        self.validity_violations == 0 && self.ordering_violations == 0
    }

    fn push(&mut self, t: f64, name: String, outcome: Result<Tau>, overlap: f64, norm0: f64) -> Option<f64> {
        let (tau, status) = match outcome {
            Ok(Tau::Finite(v)) => (Some(v), BoundStatus::Regular),
            Ok(Tau::Stationary) => (Some(0.0), BoundStatus::Stationary),
            Ok(Tau::NoBound(reason)) => {
                self.note(format!("{name} at t={t}: {reason}"));
                (None, BoundStatus::NoBound)
            }
            Err(e) => {
                self.input_errors += 1;
                self.note(format!("{name} at t={t}: {e}"));
                (None, BoundStatus::InputError)
            }
        };
        let slack = tau.map(|v| t - v);
        let valid = match status {
            BoundStatus::InputError => false,
            _ => slack.map_or(true, |s| s >= -VALIDITY_TOL),
        };
        if !valid && status != BoundStatus::InputError {
            self.validity_violations += 1;
        }
        self.entries.push(BoundEntry {
            t,
            name,
            tau,
            status,
            slack,
            valid,
            overlap,
            norm0,
        });
        tau
    }

    fn note(&mut self, note: String) {
        // Repeated degenerate notes across a time grid carry no extra information.
        if !self.notes.contains(&note) && self.notes.len() < 64 {
            self.notes.push(note);
        }
    }

    /// Audit one series of samples. `series` distinguishes e.g. different
    /// powers of the same density within one report.
    pub fn add_series(&mut self, family: Family, series: &str, samples: &[AuditSample]) {
        for s in samples {
            let (ov, n0) = (s.inputs.overlap_t, s.inputs.norm0);
            let (ml, mt) = match family {
                Family::Classical => {
                    let ml = self.push(s.t, series_name("csl_ml", series), csl_ml_type(&s.inputs), ov, n0);
                    let mt = self.push(s.t, series_name("csl_mt", series), csl_mt_type(&s.inputs), ov, n0);
                    if let (Some(ml), Some(mt)) = (ml, mt) {
                        if mt < ml - ORDERING_TOL * ml.abs().max(1e-300) {
                            self.ordering_violations += 1;
                            self.note(format!("ordering violated at t={}: mt {mt} < ml {ml}", s.t));
                        }
                    }
                    (ml, mt)
                }
                Family::FokkerPlanck | Family::Master => {
                    let prefix = if family == Family::Master { "master" } else { "fp" };
                    let ml = self.push(s.t, series_name(&format!("{prefix}_ml"), series), fp_ml_type(&s.inputs), ov, n0);
                    let mt = self.push(s.t, series_name(&format!("{prefix}_mt"), series), fp_mt_type(&s.inputs), ov, n0);
                    let combined_name = if family == Family::Master {
                        series_name("master", series)
                    } else {
                        series_name("fp_combined", series)
                    };
                    self.push(s.t, combined_name, fp_combined(&s.inputs), ov, n0);
                    (ml, mt)
                }
            };
            let ratio = match (ml, mt) {
                (Some(ml), Some(mt)) if ml > 0.0 => Some(mt / ml),
                _ => None,
            };
            self.tightness.push(Tightness {
                t: s.t,
                series: series.to_string(),
                mt_over_ml: ratio,
            });
        }
    }

    /// Quantum bounds constrain only the orthogonalization time. Entries are
    /// recorded at `t_orth` and at every sample time at or after it.
    pub fn add_quantum(
        &mut self,
        series: &str,
        delta_e: f64,
        mean_e: f64,
        hbar: f64,
        t_orth: Option<f64>,
        curve: &[(f64, f64)],
    ) {
        let Some(t_orth) = t_orth else {
            self.note(format!(
                "{}: state never orthogonalized in the sampled window; quantum bounds not applicable",
                series_name("qsl", series)
            ));
            return;
        };
        let mut points = vec![(t_orth, 0.0)];
        points.extend(curve.iter().copied().filter(|&(t, _)| t > t_orth));
        for (t, ov) in points {
            let mt = self.push(t, series_name("qsl_mt", series), qsl_mt(delta_e, hbar), ov, 1.0);
            let ml = self.push(t, series_name("qsl_ml", series), qsl_ml(mean_e, hbar), ov, 1.0);
            self.push(t, series_name("qsl_combined", series), qsl_combined(delta_e, mean_e, hbar), ov, 1.0);
            let ratio = match (ml, mt) {
                (Some(ml), Some(mt)) if ml > 0.0 => Some(mt / ml),
                _ => None,
            };
            self.tightness.push(Tightness {
                t,
                series: series.to_string(),
                mt_over_ml: ratio,
            });
        }
    }

    /// Record that every sample belongs to a stationary state.
    pub fn add_stationary(&mut self, family: Family, series: &str, times: &[f64], norm0: f64) {
        let names: &[&str] = match family {
            Family::Classical => &["csl_ml", "csl_mt"],
            Family::FokkerPlanck => &["fp_ml", "fp_mt", "fp_combined"],
            Family::Master => &["master_ml", "master_mt", "master"],
        };
        for &t in times {
            for name in names {
                self.push(t, series_name(name, series), Ok(Tau::Stationary), norm0, norm0);
            }
        }
    }
}

/// Audit a single series.
pub fn audit(scenario_id: &str, family: Family, samples: &[AuditSample]) -> BoundReport {
    let mut report = BoundReport::new(scenario_id);
    report.add_series(family, "", samples);
    report
}
