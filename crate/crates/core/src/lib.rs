//! Bearings-only target motion analysis with a towed line array.
//!
//! A straight towed array reports every contact twice: once at the true
//! bearing and once mirrored about the array axis. [`lrtma`] runs one
//! Gaussian filter per side, scores each by its measurement likelihood and
//! fuses the two estimates, so the mirror track loses weight once the
//! ownship manoeuvres.
//!
//! Module map:
//! - [`kinematics`]: CV/CT relative motion, observer inputs, process noise.
//! - [`sensing`]: bearing model, ghost bearing, angle arithmetic.
//! - [`gaussfilt`]: EKF, UKF, CKF, GHF and shifted Rayleigh filter.
//! - [`lrtma`]: the two-filter likelihood-weighted bank.
//! - [`simkit`]: scenario truth, measurement synthesis, Monte Carlo engine.
//! - [`evalkit`]: RMSE, bias norm, track loss and timing metrics.

pub mod error;
pub mod evalkit;
pub mod gaussfilt;
pub mod kinematics;
pub mod lrtma;
pub mod sensing;
pub mod simkit;

pub use error::{Error, Result};
