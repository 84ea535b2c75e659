//! Units, constants, polarization algebra and the parameter types shared by
//! every other module.
//!
//! Analytic functions take times as `f64` picoseconds; event streams use
//! integer picosecond timestamps (see [`to_timestamp`]). Energies are
//! micro-electron-volts.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.211_956_9;

/// Time in picoseconds for analytic (continuous) quantities.
pub type TimePs = f64;

/// Integer picosecond timestamp used by event streams.
pub type Timestamp = i64;

/// Rounds a real time to the nearest integer picosecond.
#[inline]
pub fn to_timestamp(t_ps: TimePs) -> Timestamp {
    t_ps.round() as Timestamp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar_uev_ps: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar_uev_ps: HBAR_UEV_PS }
    }
}

/// Energy in µeV.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyUeV(pub f64);

impl EnergyUeV {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Angular frequency in rad/ps.
    pub fn angular_frequency(self) -> f64 {
        self.0 / HBAR_UEV_PS
    }

    pub fn from_angular_frequency(omega_rad_per_ps: f64) -> Self {
        EnergyUeV(omega_rad_per_ps * HBAR_UEV_PS)
    }

    /// Phase `E·t/ħ` accumulated over `t_ps`.
    pub fn phase(self, t_ps: TimePs) -> f64 {
        self.angular_frequency() * t_ps
    }
}

impl fmt::Display for EnergyUeV {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} µeV", self.0)
    }
}

/// Oscillation period of a splitting, or the explicit absence of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeatPeriod {
    Period(TimePs),
    NoBeat,
}

impl BeatPeriod {
    pub fn period(self) -> Option<TimePs> {
        match self {
            BeatPeriod::Period(p) => Some(p),
            BeatPeriod::NoBeat => None,
        }
    }
}

/// Period `2πħ/ΔE` of the beat produced by a splitting `ΔE`.
pub fn beat_period_ps(delta_e: EnergyUeV) -> Result<BeatPeriod> {
    let e = delta_e.value();
    if !e.is_finite() || e < 0.0 {
        return Err(Error::input(format!("splitting must be finite and non-negative, got {e}")));
    }
    if e == 0.0 {
        return Ok(BeatPeriod::NoBeat);
    }
    Ok(BeatPeriod::Period(2.0 * PI * HBAR_UEV_PS / e))
}

/// The six canonical polarization states on the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolarizationLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolarizationLabel {
    pub const ALL: [PolarizationLabel; 6] = [
        PolarizationLabel::H,
        PolarizationLabel::V,
        PolarizationLabel::D,
        PolarizationLabel::A,
        PolarizationLabel::R,
        PolarizationLabel::L,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolarizationLabel::H => "H",
            PolarizationLabel::V => "V",
            PolarizationLabel::D => "D",
            PolarizationLabel::A => "A",
            PolarizationLabel::R => "R",
            PolarizationLabel::L => "L",
        }
    }

    /// The orthogonal partner on the sphere.
    pub fn orthogonal(self) -> Self {
        match self {
            PolarizationLabel::H => PolarizationLabel::V,
            PolarizationLabel::V => PolarizationLabel::H,
            PolarizationLabel::D => PolarizationLabel::A,
            PolarizationLabel::A => PolarizationLabel::D,
            PolarizationLabel::R => PolarizationLabel::L,
            PolarizationLabel::L => PolarizationLabel::R,
        }
    }

    /// True for the H/V basis, where teleportation needs no interference.
    pub fn is_polar(self) -> bool {
        matches!(self, PolarizationLabel::H | PolarizationLabel::V)
    }
}

impl fmt::Display for PolarizationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolarizationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(PolarizationLabel::H),
            "V" | "v" => Ok(PolarizationLabel::V),
            "D" | "d" => Ok(PolarizationLabel::D),
            "A" | "a" => Ok(PolarizationLabel::A),
            "R" | "r" => Ok(PolarizationLabel::R),
            "L" | "l" => Ok(PolarizationLabel::L),
            other => Err(Error::input(format!("unknown polarization label {other:?}"))),
        }
    }
}

/// A pure polarization state as a normalized Jones vector `(c_H, c_V)`.
///
/// Equality is only meaningful up to a global phase; use [`approx_eq`].
///
/// [`approx_eq`]: PolarizationState::approx_eq
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolarizationRepr")]
pub struct PolarizationState {
    h: Complex64,
    v: Complex64,
}

/// Accepted config forms: a label (`"D"`) or Jones amplitudes
/// `{ h = [re, im], v = [re, im] }`, normalized on load.
#[derive(Deserialize)]
#[serde(untagged)]
enum PolarizationRepr {
    Label(String),
    Jones { h: Complex64, v: Complex64 },
}

impl TryFrom<PolarizationRepr> for PolarizationState {
    type Error = Error;

    fn try_from(r: PolarizationRepr) -> Result<Self> {
        match r {
            PolarizationRepr::Label(l) => jones_state(&l),
            PolarizationRepr::Jones { h, v } => PolarizationState::new(h, v),
        }
    }
}

impl PolarizationState {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    /// Normalizes `(c_h, c_v)`; fails on the zero vector or non-finite input.
    pub fn new(c_h: Complex64, c_v: Complex64) -> Result<Self> {
        let norm = (c_h.norm_sqr() + c_v.norm_sqr()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::input("polarization amplitudes must be finite and not both zero"));
        }
        Ok(PolarizationState { h: c_h / norm, v: c_v / norm })
    }

    pub fn from_label(label: PolarizationLabel) -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let i = Complex64::new(0.0, FRAC_1_SQRT_2);
        let (h, v) = match label {
            PolarizationLabel::H => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            PolarizationLabel::V => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            PolarizationLabel::D => (s, s),
            PolarizationLabel::A => (s, -s),
            PolarizationLabel::R => (s, -i),
            PolarizationLabel::L => (s, i),
        };
        PolarizationState { h, v }
    }

    /// Linear polarization at `angle_rad` from H.
    pub fn linear(angle_rad: f64) -> Self {
        PolarizationState {
            h: Complex64::new(angle_rad.cos(), 0.0),
            v: Complex64::new(angle_rad.sin(), 0.0),
        }
    }

    pub fn h(&self) -> Complex64 {
        self.h
    }

    pub fn v(&self) -> Complex64 {
        self.v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PolarizationState) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// The state orthogonal to this one, `(-c_V*, c_H*)`.
    pub fn orthogonal(&self) -> Self {
        PolarizationState { h: -self.v.conj(), v: self.h.conj() }
    }

    /// Bit flip `σx`: swaps the H and V amplitudes.
    pub fn flipped(&self) -> Self {
        PolarizationState { h: self.v, v: self.h }
    }

    pub fn with_global_phase(&self, phase_rad: f64) -> Self {
        let p = Complex64::from_polar(1.0, phase_rad);
        PolarizationState { h: self.h * p, v: self.v * p }
    }

    /// Equality up to a global phase.
    pub fn approx_eq(&self, other: &PolarizationState, tol: f64) -> bool {
        (1.0 - poincare_overlap(self, other)).abs() <= tol
    }
}

/// `|⟨a|b⟩|²`; with `a`, `b` polarizations of two beams this is `cos²φ`.
pub fn poincare_overlap(a: &PolarizationState, b: &PolarizationState) -> f64 {
    a.inner(b).norm_sqr().clamp(0.0, 1.0)
}

/// The exact canonical state for a label.
pub fn jones_state(label: &str) -> Result<PolarizationState> {
    Ok(PolarizationState::from_label(label.parse()?))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Emitter physics of one quantum dot at one excitation power.
///
/// `blink_x`/`blink_y` and `tau{1,2,3}_ps` are the amplitudes and timescales
/// of the four-level autocorrelation model; `beta` is the uncorrelated
/// background fraction relative to the exciton intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumDotParams {
    pub t1_ps: TimePs,
    pub t2_ps: TimePs,
    pub fss_uev: EnergyUeV,
    pub blink_x: f64,
    pub blink_y: f64,
    pub tau1_ps: TimePs,
    pub tau2_ps: TimePs,
    pub tau3_ps: TimePs,
    pub beta: f64,
    #[serde(default = "default_pump")]
    pub pump_power_rel: f64,
    #[serde(default = "default_entanglement")]
    pub entanglement_fidelity_max: f64,
}

fn default_pump() -> f64 {
    1.0
}

fn default_entanglement() -> f64 {
    1.0
}

impl QuantumDotParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("t1_ps", self.t1_ps)?;
        check_positive("t2_ps", self.t2_ps)?;
        check_positive("tau1_ps", self.tau1_ps)?;
        check_positive("tau2_ps", self.tau2_ps)?;
        check_positive("tau3_ps", self.tau3_ps)?;
        check_non_negative("fss_uev", self.fss_uev.value())?;
        check_non_negative("blink_x", self.blink_x)?;
        check_non_negative("blink_y", self.blink_y)?;
        check_non_negative("beta", self.beta)?;
        check_positive("pump_power_rel", self.pump_power_rel)?;
        check_unit("entanglement_fidelity_max", self.entanglement_fidelity_max)?;
        if self.t2_ps > 2.0 * self.t1_ps * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "t2_ps = {} exceeds the Fourier limit 2·t1_ps = {}",
                self.t2_ps,
                2.0 * self.t1_ps
            )));
        }
        if !(self.tau1_ps <= self.tau2_ps && self.tau2_ps <= self.tau3_ps) {
            return Err(Error::config("timescales must satisfy tau1 <= tau2 <= tau3"));
        }
        Ok(())
    }

    /// Zero-delay autocorrelation including background, `(2β+β²)/(1+β)²`.
    pub fn g2_zero(&self) -> f64 {
        let b = self.beta;
        (2.0 * b + b * b) / ((1.0 + b) * (1.0 + b))
    }

    /// Background fraction that yields a given zero-delay autocorrelation.
    pub fn beta_for_g2_zero(g2_zero: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&g2_zero) {
            return Err(Error::input(format!("g2(0) must lie in [0, 1), got {g2_zero}")));
        }
        Ok(1.0 / (1.0 - g2_zero).sqrt() - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserParams {
    /// Intensity in units of the dot intensity η; the simulated photon rate
    /// is `α²` times the dot's rate at the same point.
    pub intensity_alpha2: f64,
    pub detuning_uev: EnergyUeV,
    pub polarization: PolarizationState,
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("intensity_alpha2", self.intensity_alpha2)?;
        if !self.detuning_uev.value().is_finite() {
            return Err(Error::config("detuning_uev must be finite"));
        }
        if (self.polarization.norm_sqr() - 1.0).abs() > 1e-9 {
            return Err(Error::config("laser polarization must be normalized"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub response_fwhm_ps: TimePs,
    pub efficiency: f64,
    pub dark_rate_per_ps: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams { response_fwhm_ps: 0.0, efficiency: 1.0, dark_rate_per_ps: 0.0 }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("response_fwhm_ps", self.response_fwhm_ps)?;
        check_unit("efficiency", self.efficiency)?;
        check_non_negative("dark_rate_per_ps", self.dark_rate_per_ps)
    }

    /// Standard deviation of the Gaussian timing response.
    pub fn response_sigma_ps(&self) -> TimePs {
        fwhm_to_sigma(self.response_fwhm_ps)
    }
}

#[inline]
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}

/// Dot intensity η and laser intensity α² at the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceIntensityRatio {
    pub eta: f64,
    pub alpha2: f64,
}

impl SourceIntensityRatio {
    pub fn new(eta: f64, alpha2: f64) -> Result<Self> {
        if !(eta.is_finite() && alpha2.is_finite() && eta >= 0.0 && alpha2 >= 0.0) {
            return Err(Error::input("intensities must be finite and non-negative"));
        }
        if eta + alpha2 <= 0.0 {
            return Err(Error::input("eta + alpha2 must be positive"));
        }
        Ok(SourceIntensityRatio { eta, alpha2 })
    }

    /// Laser intensity normalized to one: `(η/α², 1)`.
    pub fn from_ratio(eta_over_alpha2: f64) -> Result<Self> {
        Self::new(eta_over_alpha2, 1.0)
    }

    pub fn ratio(&self) -> f64 {
        self.eta / self.alpha2
    }
}
