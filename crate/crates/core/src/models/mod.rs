//! Closed-form photon-statistics models.
//!
//! These serve twice: as fit models for [`crate::estimation`] and as the
//! independent oracles that the Monte Carlo engine is checked against.

mod cascade;
mod convolve;
mod fringe;
mod g2;
mod lifetime;
mod tpi;

pub use cascade::{cascade_state, teleport_fidelity, CascadeStateParams, TwoQubitState};
pub use convolve::{
    binned_convolved, convolve_gaussian, exp_gauss_conv, erfcx, SampledCurve,
    KERNEL_HALF_WIDTH_SIGMAS, MAX_GRID_STEP_PS,
};
pub use fringe::{fringe_contrast, fringe_visibility, FringeEnvelopeParams};
pub use g2::{g2_hbt, g2_hbt_convolved, g2_qd, g2_qd_convolved, hbt_from_qd, G2QdModel};
pub use lifetime::{fourier_limit_ratio, lifetime_decay};
pub use tpi::{
    g2_tpi, peak_visibility, tpi_visibility, visibility_vs_ratio, TpiBaseline, TpiParams,
};

use std::fmt;

/// Non-fatal diagnostics raised by model evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelWarning {
    /// Grid spacing coarser than half the kernel FWHM.
    UndersampledKernel { step_ps: f64, fwhm_ps: f64 },
    /// `T2/2T1` above the transform limit.
    UnphysicalCoherence { ratio: f64 },
    /// Autocorrelation parameters that make `g2_qd` negative somewhere.
    NegativeAutocorrelation { min_value: f64 },
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelWarning::UndersampledKernel { step_ps, fwhm_ps } => write!(
                f,
                "grid step {step_ps} ps undersamples a {fwhm_ps} ps FWHM kernel"
            ),
            ModelWarning::UnphysicalCoherence { ratio } => {
                write!(f, "T2/2T1 = {ratio} exceeds the transform limit")
            }
            ModelWarning::NegativeAutocorrelation { min_value } => {
                write!(f, "autocorrelation model dips to {min_value} < 0")
            }
        }
    }
}
