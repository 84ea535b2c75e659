use serde::{Deserialize, Serialize};

use crate::domain::{EnergyUeV, TimePs};
use crate::error::{Error, Result};

/// `(I_max − I_min)/(I_max + I_min)`.
pub fn fringe_visibility(i_max: f64, i_min: f64) -> Result<f64> {
    if !(i_max.is_finite() && i_min.is_finite()) || i_min < 0.0 {
        return Err(Error::input("intensities must be finite and non-negative"));
    }
    if i_min > i_max {
        return Err(Error::input(format!("i_min = {i_min} exceeds i_max = {i_max}")));
    }
    if i_max == 0.0 {
        return Err(Error::Undefined("visibility of a dark fringe pattern".into()));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

/// Zero-delay contrast, coherence time and beat energy of a
/// first-order interferogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeEnvelopeParams {
    pub a0: f64,
    pub t2_ps: TimePs,
    pub delta_e_uev: EnergyUeV,
}

impl FringeEnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0.is_finite() && self.a0.abs() <= 1.0) {
            return Err(Error::input(format!("a0 must satisfy |a0| <= 1, got {}", self.a0)));
        }
        if !(self.t2_ps.is_finite() && self.t2_ps > 0.0) {
            return Err(Error::input("t2_ps must be positive"));
        }
        Ok(())
    }
}

/// Signed fringe contrast `A0·exp(−|Δτ|/T2)·cos(ΔE·Δτ/ħ)`.
pub fn fringe_contrast(dtau_ps: TimePs, p: &FringeEnvelopeParams) -> f64 {
    p.a0 * (-dtau_ps.abs() / p.t2_ps).exp() * p.delta_e_uev.phase(dtau_ps).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn visibility_examples() {
        assert_eq!(fringe_visibility(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(fringe_visibility(7.0, 7.0).unwrap(), 0.0);
        assert_eq!(fringe_visibility(3.0, 1.0).unwrap(), 0.5);
        assert!(matches!(fringe_visibility(1.0, 2.0), Err(Error::Input(_))));
        assert!(matches!(fringe_visibility(0.0, 0.0), Err(Error::Undefined(_))));
    }

    #[test]
    fn contrast_examples() {
        let p = FringeEnvelopeParams { a0: 0.97, t2_ps: 331.0, delta_e_uev: EnergyUeV(18.5) };
        assert_eq!(fringe_contrast(0.0, &p), 0.97);
        let q = FringeEnvelopeParams { delta_e_uev: EnergyUeV(0.0), ..p };
        assert!((fringe_contrast(331.0, &q) - 0.97 / std::f64::consts::E).abs() < 1e-15);
        // Half a beat period flips the sign of the contrast.
        let half = std::f64::consts::PI * crate::domain::HBAR_UEV_PS / 18.5;
        assert!(fringe_contrast(half, &p) < 0.0);
    }

    proptest! {
        #[test]
        fn contrast_even_and_bounded(t in -5000.0f64..5000.0, a0 in 0.0f64..1.0, t2 in 10.0f64..3000.0, de in 0.0f64..50.0) {
            let p = FringeEnvelopeParams { a0, t2_ps: t2, delta_e_uev: EnergyUeV(de) };
            prop_assert_eq!(fringe_contrast(t, &p), fringe_contrast(-t, &p));
            prop_assert!(fringe_contrast(t, &p).abs() <= a0 + 1e-15);
        }
    }
}
