use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HcsParams {
    beta: f64,
}

impl HcsParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("{beta} is not a positive number")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn score(&self, accuracy: f64, ece: f64) -> Result<f64> {
        hcs(accuracy, ece, self.beta)
    }
}

impl Default for HcsParams {
    fn default() -> Self {
        Self { beta: 1.0 }
    }
}

/// Weighted harmonic mean of accuracy and `1 - ece`:
/// `(1 + b) * acc * (1 - ece) / (b * acc + (1 - ece))`.
///
/// Inputs are fractions; multiply the result by 100 for percentages.
pub fn hcs(accuracy: f64, ece: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("{beta} is not a positive number")));
    }
    for (name, v) in [("accuracy", accuracy), ("ece", ece)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} outside [0, 1]")));
        }
    }
    let calibrated = 1.0 - ece;
    let den = beta * accuracy + calibrated;
    if den <= 0.0 {
        return Err(Error::UndefinedHcs);
    }
    Ok((1.0 + beta) * accuracy * calibrated / den)
}
