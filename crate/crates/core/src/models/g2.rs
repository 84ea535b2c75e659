use serde::{Deserialize, Serialize};

use super::convolve::exp_gauss_conv;
use super::ModelWarning;
use crate::domain::{fwhm_to_sigma, QuantumDotParams, TimePs};

/// Four-level emitter autocorrelation
/// `1 − (1+X+Y)e^{−|τ|/τ1} + X e^{−|τ|/τ2} + Y e^{−|τ|/τ3}`.
///
/// `y = 0` is the three-level model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2QdModel {
    pub x: f64,
    pub y: f64,
    pub tau1_ps: TimePs,
    pub tau2_ps: TimePs,
    pub tau3_ps: TimePs,
}

impl From<&QuantumDotParams> for G2QdModel {
    fn from(p: &QuantumDotParams) -> Self {
        G2QdModel { x: p.blink_x, y: p.blink_y, tau1_ps: p.tau1_ps, tau2_ps: p.tau2_ps, tau3_ps: p.tau3_ps }
    }
}

impl G2QdModel {
    pub fn eval(&self, tau: TimePs) -> f64 {
        let a = tau.abs();
        let e1 = (-a / self.tau1_ps).exp();
        // Grouped so that τ = 0 gives exactly zero.
        (1.0 - e1) - self.x * (e1 - (-a / self.tau2_ps).exp()) - self.y * (e1 - (-a / self.tau3_ps).exp())
    }

    /// Exact convolution with a Gaussian response of the given FWHM.
    pub fn eval_convolved(&self, tau: TimePs, fwhm_ps: TimePs) -> f64 {
        let s = fwhm_to_sigma(fwhm_ps);
        let mut v = 1.0 - (1.0 + self.x + self.y) * exp_gauss_conv(tau, self.tau1_ps, s);
        if self.x != 0.0 {
            v += self.x * exp_gauss_conv(tau, self.tau2_ps, s);
        }
        if self.y != 0.0 {
            v += self.y * exp_gauss_conv(tau, self.tau3_ps, s);
        }
        v
    }

    /// Flags parameter sets for which the model goes negative.
    pub fn check_non_negative(&self) -> Option<ModelWarning> {
        let hi = 10.0 * self.tau3_ps.max(self.tau2_ps).max(self.tau1_ps);
        let min_value = (0..=4000)
            .map(|i| self.eval(hi * (i as f64 / 4000.0).powi(3)))
            .fold(f64::INFINITY, f64::min);
        (min_value < -1e-12).then_some(ModelWarning::NegativeAutocorrelation { min_value })
    }
}

/// Background-corrected autocorrelation `(g_qd + 2β + β²)/(1+β)²`.
#[inline]
pub fn hbt_from_qd(g_qd: f64, beta: f64) -> f64 {
    (g_qd + 2.0 * beta + beta * beta) / ((1.0 + beta) * (1.0 + beta))
}

pub fn g2_qd(tau: TimePs, p: &QuantumDotParams) -> f64 {
    G2QdModel::from(p).eval(tau)
}

pub fn g2_hbt(tau: TimePs, p: &QuantumDotParams) -> f64 {
    hbt_from_qd(g2_qd(tau, p), p.beta)
}

pub fn g2_qd_convolved(tau: TimePs, p: &QuantumDotParams, fwhm_ps: TimePs) -> f64 {
    G2QdModel::from(p).eval_convolved(tau, fwhm_ps)
}

pub fn g2_hbt_convolved(tau: TimePs, p: &QuantumDotParams, fwhm_ps: TimePs) -> f64 {
    hbt_from_qd(g2_qd_convolved(tau, p, fwhm_ps), p.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EnergyUeV;
    use crate::models::convolve::{convolve_gaussian, SampledCurve};
    use proptest::prelude::*;

    pub(crate) fn psat_dot() -> QuantumDotParams {
        QuantumDotParams {
            t1_ps: 1765.0,
            t2_ps: 294.0,
            fss_uev: EnergyUeV(5.7),
            blink_x: 0.35,
            blink_y: 0.12,
            tau1_ps: 880.0,
            tau2_ps: 4000.0,
            tau3_ps: 20000.0,
            beta: QuantumDotParams::beta_for_g2_zero(0.177).unwrap(),
            pump_power_rel: 1.0,
            entanglement_fidelity_max: 0.91,
        }
    }

    #[test]
    fn limits() {
        let p = psat_dot();
        assert_eq!(g2_qd(0.0, &p), 0.0);
        assert!((g2_qd(1e9, &p) - 1.0).abs() < 1e-12);
        assert!((g2_hbt(0.0, &p) - 0.177).abs() < 1e-12);
        assert!((g2_hbt(1e9, &p) - 1.0).abs() < 1e-12);
        let three = QuantumDotParams { blink_y: 0.0, ..p };
        let t = 700.0;
        let direct = 1.0 - 1.35 * (-t / 880.0f64).exp() + 0.35 * (-t / 4000.0f64).exp();
        assert!((g2_qd(t, &three) - direct).abs() < 1e-15);
    }

    #[test]
    fn zero_background_is_bare_model() {
        let p = QuantumDotParams { beta: 0.0, ..psat_dot() };
        for i in -100..100 {
            let t = i as f64 * 37.0;
            assert_eq!(g2_hbt(t, &p), g2_qd(t, &p));
        }
    }

    #[test]
    fn background_limit_uniform() {
        let p = QuantumDotParams { beta: 1e-10, ..psat_dot() };
        let sup = (-2000..2000)
            .map(|i| (g2_hbt(i as f64 * 13.0, &p) - g2_qd(i as f64 * 13.0, &p)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-9);
    }

    #[test]
    fn convolution_lifts_zero_delay() {
        // Numeric-convolution oracle: the apparent g2(0) of a perfect emitter
        // after a 125 ps response.
        let p = QuantumDotParams { beta: 0.0, blink_x: 0.0, blink_y: 0.0, ..psat_dot() };
        let grid = SampledCurve::from_fn(-10000.0, 1.0, 20001, |t| g2_qd(t, &p)).unwrap();
        let (conv, _) = convolve_gaussian(&grid, 125.0).unwrap();
        let numeric = conv.values[10000];
        let analytic = g2_qd_convolved(0.0, &p, 125.0);
        assert!(numeric > 0.0);
        assert!((numeric - analytic).abs() < 1e-4, "{numeric} vs {analytic}");
        // Frozen from the numeric oracle above (1 ps grid).
        assert!((analytic - 0.04637).abs() < 1e-4, "{analytic}");
    }

    #[test]
    fn negative_parameters_flagged() {
        let ok = G2QdModel::from(&psat_dot());
        assert!(ok.check_non_negative().is_none());
        let bad = G2QdModel { x: 3.0, y: 0.0, tau1_ps: 1000.0, tau2_ps: 200.0, tau3_ps: 300.0 };
        assert!(bad.check_non_negative().is_some());
    }

    proptest! {
        #[test]
        fn even_in_tau(t in -1e5f64..1e5) {
            let p = psat_dot();
            prop_assert_eq!(g2_qd(t, &p), g2_qd(-t, &p));
            prop_assert_eq!(g2_hbt(t, &p), g2_hbt(-t, &p));
        }

        #[test]
        fn non_negative_for_ordered_timescales(
            x in 0.0f64..3.0, y in 0.0f64..3.0,
            t1 in 50.0f64..3000.0, g2 in 1.0f64..20.0, g3 in 1.0f64..20.0,
            tau in 0.0f64..1e5,
        ) {
            let m = G2QdModel { x, y, tau1_ps: t1, tau2_ps: t1 * g2, tau3_ps: t1 * g2 * g3 };
            prop_assert!(m.eval(tau) >= -1e-12);
        }
    }
}
