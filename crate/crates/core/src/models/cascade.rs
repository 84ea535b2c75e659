use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{EnergyUeV, TimePs};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStateParams {
    pub fss_uev: EnergyUeV,
    /// Exciton emission delay after the biexciton photon.
    pub tau_ps: TimePs,
}

/// Pure two-photon polarization state in the basis
/// `|H_XX H_X⟩, |H_XX V_X⟩, |V_XX H_X⟩, |V_XX V_X⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState(pub [Complex64; 4]);

impl TwoQubitState {
    pub fn phi_plus() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let z = Complex64::new(0.0, 0.0);
        TwoQubitState([s, z, z, s])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &TwoQubitState) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &TwoQubitState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// `(|H_XX H_X⟩ + e^{iΔEτ/ħ}|V_XX V_X⟩)/√2`.
///
/// H is taken as the higher-energy exciton eigenstate, so the relative
/// phase advances with `+ΔE`.
pub fn cascade_state(p: &CascadeStateParams) -> TwoQubitState {
    let s = FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    TwoQubitState([
        Complex64::new(s, 0.0),
        z,
        z,
        Complex64::from_polar(s, p.fss_uev.phase(p.tau_ps)),
    ])
}

/// `F_P = g³_P / (g³_P + g³_Q)`.
pub fn teleport_fidelity(g3_p: f64, g3_q: f64) -> Result<f64> {
    if !(g3_p.is_finite() && g3_q.is_finite()) || g3_p < 0.0 || g3_q < 0.0 {
        return Err(Error::input("third-order correlations must be finite and non-negative"));
    }
    let total = g3_p + g3_q;
    if total == 0.0 {
        return Err(Error::Undefined("fidelity with no coincidences in either output".into()));
    }
    // Evaluating the smaller share and complementing it makes
    // F(a, b) + F(b, a) == 1 hold exactly in floating point.
    if g3_p <= g3_q {
        Ok(g3_p / total)
    } else {
        Ok(1.0 - g3_q / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{beat_period_ps, HBAR_UEV_PS};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_and_pi_phase() {
        let e = EnergyUeV(5.7);
        let s0 = cascade_state(&CascadeStateParams { fss_uev: e, tau_ps: 0.0 });
        assert!((s0.fidelity(&TwoQubitState::phi_plus()) - 1.0).abs() < 1e-15);
        let t_pi = PI * HBAR_UEV_PS / 5.7;
        let s_pi = cascade_state(&CascadeStateParams { fss_uev: e, tau_ps: t_pi });
        assert!((s_pi.0[3].re + FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(s_pi.fidelity(&TwoQubitState::phi_plus()) < 1e-24);
    }

    #[test]
    fn fidelity_period_is_beat_period() {
        let e = EnergyUeV(5.7);
        let period = beat_period_ps(e).unwrap().period().unwrap();
        assert!((period - 725.6).abs() < 0.1);
        let f = |t: f64| cascade_state(&CascadeStateParams { fss_uev: e, tau_ps: t }).fidelity(&TwoQubitState::phi_plus());
        assert!((f(period) - 1.0).abs() < 1e-12);
        assert!((f(period / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(teleport_fidelity(4.0, 4.0).unwrap(), 0.5);
        assert_eq!(teleport_fidelity(9.0, 0.0).unwrap(), 1.0);
        assert!(matches!(teleport_fidelity(0.0, 0.0), Err(Error::Undefined(_))));
        assert!(teleport_fidelity(-1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_periodic(de in 0.1f64..50.0, tau in -1e4f64..1e4) {
            let e = EnergyUeV(de);
            let s = cascade_state(&CascadeStateParams { fss_uev: e, tau_ps: tau });
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let period = beat_period_ps(e).unwrap().period().unwrap();
            let t = cascade_state(&CascadeStateParams { fss_uev: e, tau_ps: tau + period });
            prop_assert!((s.fidelity(&t) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn swapped_fidelities_sum_to_one(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            prop_assume!(a + b > 0.0);
            let s = teleport_fidelity(a, b).unwrap() + teleport_fidelity(b, a).unwrap();
            prop_assert_eq!(s, 1.0);
        }
    }
}
