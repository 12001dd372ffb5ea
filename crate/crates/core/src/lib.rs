//! Calibration metrics, temperature scaling and calibration-aware
//! architecture search over tabular benchmarks.

pub mod analysis;
pub mod archspace;
pub mod bin_metrics;
pub mod binning;
pub mod continuous;
pub mod error;
pub mod predictions;
pub mod recalibration;
pub mod suite;

pub use error::{Error, Result};
