//! Least-squares fits of the correlation and coherence models.

mod fringe;
mod g2fit;
mod lifetime;
pub mod lm;
mod report;
pub mod spectral;
mod tpifit;

pub use fringe::{
    beat_frequency, fit_damped_oscillation, fit_fringe_envelope, fringe_jacobian, fringe_residuals, Beat,
    FRINGE_MODEL, OSCILLATION_MODEL,
};
pub use g2fit::{fit_g2_hbt, g2_hbt_binned, G2Levels};
pub use lifetime::{fit_lifetime, LIFETIME_MODEL};
pub use lm::{least_squares, numeric_jacobian, LmOptions, LmOutcome, Termination};
pub use tpifit::{fit_tpi, TpiFitSpec, TPI_MODEL};
pub use report::{Fit, FitReport, ModelCurve};

/// Model identifiers accepted by the fitting front ends.
pub const MODEL_IDS: &[&str] =
    &[FRINGE_MODEL, "g2-3level", "g2-4level", TPI_MODEL, LIFETIME_MODEL, OSCILLATION_MODEL];
