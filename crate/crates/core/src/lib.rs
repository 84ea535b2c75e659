//! Simulation and analysis of quantum-dot photon statistics: single-photon
//! coherence, two-photon interference with a weak laser, and post-selected
//! teleportation of polarization qubits.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`]: units, constants, polarization algebra, parameter types
//! - [`models`]: closed-form correlation models and detector convolution
//! - [`stream`]: time-tag records and the `TTAG1`/CSV file formats
//! - [`synth`]: seeded Monte Carlo generation of detector click streams
//! - [`correlation`]: g², triggered g³, fidelity maps and window scans
//! - [`estimation`]: least-squares fitting of the models
//! - [`experiment`]: the full teleportation analysis

pub mod domain;
pub mod error;
pub mod models;
pub mod stream;
pub mod correlation;
pub mod estimation;
pub mod synth;
pub mod experiment;

pub use domain::*;
pub use error::{Error, Result};
