//! Gaze error analysis: from raw binocular eye-tracker samples to angular
//! errors, robust cleaning and statistics, augmentation, feature matrices,
//! condition classifiers and gaze-error regression models.
//!
//! Pipeline order mirrors the module layout:
//!
//! ```text
//! dataset -> geometry -> analysis -> augment -> features -> learn -> evaluate
//! ```
//!
//! [`synth`] produces deterministic sessions for tests and demos when no
//! recorded data is available.

pub mod analysis;
pub mod augment;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod geometry;
pub mod learn;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
