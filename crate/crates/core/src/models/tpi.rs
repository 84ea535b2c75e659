use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::g2::G2QdModel;
use crate::domain::{fwhm_to_sigma, EnergyUeV, QuantumDotParams, SourceIntensityRatio, TimePs};
use crate::error::{Error, Result};

/// Long-delay baseline convention for the dot/laser correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpiBaseline {
    /// `1 + [2ηα²(1 + e^{−|τ|/T2}cos(ΔE_Lτ/ħ)cos²φ) + η²(g_QD − 1) + α⁴]/(η+α²+β)²`,
    /// whose long-delay value is `1 + (2ηα² + α⁴)/(η+α²+β)²`.
    AsPrinted,
    /// Same-port correlation of the mixed field normalized to one at long
    /// delay: `1 + [2ηα² e^{−|τ|/T2}cos(ΔE_Lτ/ħ)cos²φ + η²(g_QD − 1)]/(η+α²+β)²`.
    #[default]
    Normalized,
}

/// Parameters of the dot/laser two-photon interference correlation.
///
/// `beta` is the uncorrelated background in the same intensity units as
/// `ratio.eta` and `ratio.alpha2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpiParams {
    pub ratio: SourceIntensityRatio,
    pub beta: f64,
    pub t2_ps: TimePs,
    pub detuning_uev: EnergyUeV,
    pub phi_rad: f64,
    pub qd_g2: G2QdModel,
}

impl TpiParams {
    /// Laser intensity set to one, background derived from the dot's
    /// zero-delay autocorrelation.
    pub fn from_g2_zero(
        eta_over_alpha2: f64,
        g2_zero: f64,
        t2_ps: TimePs,
        detuning_uev: EnergyUeV,
        qd_g2: G2QdModel,
    ) -> Result<Self> {
        let beta_rel = QuantumDotParams::beta_for_g2_zero(g2_zero)?;
        Ok(TpiParams {
            ratio: SourceIntensityRatio::from_ratio(eta_over_alpha2)?,
            beta: beta_rel * eta_over_alpha2,
            t2_ps,
            detuning_uev,
            phi_rad: 0.0,
            qd_g2,
        })
    }

    pub fn with_phi(&self, phi_rad: f64) -> Self {
        TpiParams { phi_rad, ..*self }
    }

    pub fn co_polarized(&self) -> Self {
        self.with_phi(0.0)
    }

    pub fn cross_polarized(&self) -> Self {
        self.with_phi(FRAC_PI_2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&self.phi_rad) {
            return Err(Error::input(format!("phi must lie in [0, π/2], got {}", self.phi_rad)));
        }
        if !(self.t2_ps > 0.0) || self.beta < 0.0 {
            return Err(Error::input("t2 must be positive and beta non-negative"));
        }
        Ok(())
    }
}

/// Dot/laser intensity correlation at delay `tau`.
pub fn g2_tpi(tau: TimePs, p: &TpiParams, baseline: TpiBaseline) -> f64 {
    let eta = p.ratio.eta;
    let a2 = p.ratio.alpha2;
    let s = eta + a2 + p.beta;
    let cos_phi = p.phi_rad.cos();
    let overlap = (-tau.abs() / p.t2_ps).exp() * p.detuning_uev.phase(tau).cos() * cos_phi * cos_phi;
    let multi = eta * eta * (p.qd_g2.eval(tau) - 1.0);
    let bracket = match baseline {
        TpiBaseline::AsPrinted => 2.0 * eta * a2 * (1.0 + overlap) + multi + a2 * a2,
        TpiBaseline::Normalized => 2.0 * eta * a2 * overlap + multi,
    };
    1.0 + bracket / (s * s)
}

/// Gaussian-weighted average of `f` around `tau` (1 ps quadrature).
fn convolve_at(f: impl Fn(f64) -> f64, tau: TimePs, fwhm_ps: TimePs) -> f64 {
    if fwhm_ps <= 0.0 {
        return f(tau);
    }
    let sigma = fwhm_to_sigma(fwhm_ps);
    let half = (super::KERNEL_HALF_WIDTH_SIGMAS * sigma).ceil() as i64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in -half..=half {
        let s = k as f64;
        let w = (-0.5 * s * s / (sigma * sigma)).exp();
        num += w * f(tau - s);
        den += w;
    }
    num / den
}

/// `V(τ) = g∥(τ)/g⊥(τ) − 1` of the detector-convolved co- and
/// cross-polarized correlations.
pub fn tpi_visibility(tau: TimePs, p: &TpiParams, fwhm_ps: TimePs) -> Result<f64> {
    let co = p.co_polarized();
    let cross = p.cross_polarized();
    let g_co = convolve_at(|t| g2_tpi(t, &co, TpiBaseline::Normalized), tau, fwhm_ps);
    let g_cross = convolve_at(|t| g2_tpi(t, &cross, TpiBaseline::Normalized), tau, fwhm_ps);
    if !(g_cross.abs() > 1e-300) {
        return Err(Error::Numerical("cross-polarized correlation vanishes".into()));
    }
    Ok(g_co / g_cross - 1.0)
}

/// Maximum of [`tpi_visibility`] over delays within three coherence times.
pub fn peak_visibility(p: &TpiParams, fwhm_ps: TimePs) -> Result<f64> {
    let at_zero = tpi_visibility(0.0, p, fwhm_ps)?;
    if p.detuning_uev.value() == 0.0 {
        return Ok(at_zero);
    }
    let reach = 3.0 * p.t2_ps;
    let mut best = (0.0, at_zero);
    let coarse = 5.0;
    let n = (reach / coarse) as i64;
    for k in -n..=n {
        let t = k as f64 * coarse;
        let v = tpi_visibility(t, p, fwhm_ps)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let mut peak = best.1;
    for k in -10..=10 {
        let v = tpi_visibility(best.0 + k as f64 * 0.5, p, fwhm_ps)?;
        peak = peak.max(v);
    }
    Ok(peak)
}

/// Peak visibility as a function of `η/α²` for a dot with the given
/// zero-delay autocorrelation, without detector response.
pub fn visibility_vs_ratio(
    ratio_grid: &[f64],
    g2_zero: f64,
    fixed: &TpiParams,
) -> Result<Vec<(f64, f64)>> {
    ratio_grid
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::input(format!("ratios must be positive, got {r}")));
            }
            let p = TpiParams::from_g2_zero(r, g2_zero, fixed.t2_ps, fixed.detuning_uev, fixed.qd_g2)?;
            Ok((r, peak_visibility(&p, 0.0)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qd() -> G2QdModel {
        G2QdModel { x: 0.35, y: 0.12, tau1_ps: 880.0, tau2_ps: 4000.0, tau3_ps: 20000.0 }
    }

    fn psat() -> TpiParams {
        TpiParams::from_g2_zero(1.0, 0.177, 294.0, EnergyUeV(0.0), qd()).unwrap()
    }

    #[test]
    fn cross_polarized_removes_interference() {
        let p = psat();
        let cross = p.cross_polarized();
        let s = p.ratio.eta + p.ratio.alpha2 + p.beta;
        for t in [0.0, 10.0, 150.0, 1000.0] {
            let a = g2_tpi(t, &cross, TpiBaseline::Normalized);
            let b = 1.0 + p.ratio.eta.powi(2) * (p.qd_g2.eval(t) - 1.0) / (s * s);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn printed_form_dot_off_is_two() {
        let p = TpiParams { ratio: SourceIntensityRatio::new(0.0, 1.0).unwrap(), beta: 0.0, ..psat() };
        for t in [-3000.0, 0.0, 42.0] {
            assert_eq!(g2_tpi(t, &p, TpiBaseline::AsPrinted), 2.0);
            assert_eq!(g2_tpi(t, &p, TpiBaseline::Normalized), 1.0);
        }
        // Printed long-delay baseline for equal intensities without background.
        let q = TpiParams { beta: 0.0, ..psat() };
        assert!((g2_tpi(1e9, &q, TpiBaseline::AsPrinted) - 1.75).abs() < 1e-12);
    }

    // Closed-form zero-delay visibility with g_QD(0) = 0 and no response:
    // V = 2ηα² / ((η+α²+β)² − η²).
    fn zero_delay_oracle(eta: f64, beta_rel: f64) -> f64 {
        let s = eta + 1.0 + beta_rel * eta;
        2.0 * eta / (s * s - eta * eta)
    }

    #[test]
    fn published_peak_visibilities() {
        let v1 = peak_visibility(&psat(), 0.0).unwrap();
        let b1 = QuantumDotParams::beta_for_g2_zero(0.177).unwrap();
        assert!((v1 - zero_delay_oracle(1.0, b1)).abs() < 1e-12);
        assert!((v1 - 0.586).abs() < 0.005, "{v1}");

        let low = TpiParams::from_g2_zero(2.5, 0.095, 471.0, EnergyUeV(0.0), qd()).unwrap();
        let v2 = peak_visibility(&low, 0.0).unwrap();
        assert!((v2 - 0.724).abs() < 0.007, "{v2}");
    }

    #[test]
    fn ideal_curve_above_finite_g2() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 0.1).collect();
        let fixed = psat();
        let ideal = visibility_vs_ratio(&grid, 0.0, &fixed).unwrap();
        let a = visibility_vs_ratio(&grid, 0.177, &fixed).unwrap();
        let b = visibility_vs_ratio(&grid, 0.095, &fixed).unwrap();
        for i in 0..grid.len() {
            assert!(ideal[i].1 > a[i].1 && ideal[i].1 > b[i].1);
            for v in [ideal[i].1, a[i].1, b[i].1] {
                assert!((0.0..=1.0).contains(&v));
            }
            // Without background the peak is 2r/(2r+1).
            let r = grid[i];
            assert!((ideal[i].1 - 2.0 * r / (2.0 * r + 1.0)).abs() < 1e-12);
        }
        assert!(ideal.windows(2).all(|w| w[1].1 > w[0].1));
        let far = visibility_vs_ratio(&[1e6], 0.0, &fixed).unwrap()[0].1;
        assert!((far - 1.0).abs() < 1e-5);
    }

    #[test]
    fn response_reduces_visibility() {
        let p = psat();
        let raw = tpi_visibility(0.0, &p, 0.0).unwrap();
        let conv = tpi_visibility(0.0, &p, 125.0).unwrap();
        assert!(conv < raw && conv > 0.4);
    }

    #[test]
    fn detuning_shifts_peak_off_zero_only_in_magnitude() {
        let p = TpiParams { detuning_uev: EnergyUeV(2.0), ..psat() };
        let v0 = tpi_visibility(0.0, &p, 0.0).unwrap();
        assert!((peak_visibility(&p, 0.0).unwrap() - v0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn even_and_co_above_cross_at_zero(t in -5000.0f64..5000.0, r in 0.05f64..10.0, de in -10.0f64..10.0, g in 0.0f64..0.5) {
            let p = TpiParams::from_g2_zero(r, g, 300.0, EnergyUeV(de), qd()).unwrap();
            for b in [TpiBaseline::AsPrinted, TpiBaseline::Normalized] {
                prop_assert!((g2_tpi(t, &p, b) - g2_tpi(-t, &p, b)).abs() < 1e-12);
                prop_assert!(g2_tpi(0.0, &p.co_polarized(), b) > g2_tpi(0.0, &p.cross_polarized(), b));
            }
        }
    }
}
