//! Effective decay rates from observed deskilling.
//!
//! Under full delegation capability decays as `H(t) = H₀ exp(−β_eff t)`, so a
//! fractional decline `x` over an exposure `t` gives `β_eff = −ln(1 − x)/t`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskillObservation {
    pub domain: String,
    pub decline: f64,
    pub duration: f64,
    pub time_unit: String,
}

impl DeskillObservation {
    pub fn new(domain: &str, decline: f64, duration: f64, time_unit: &str) -> Self {
        Self { domain: domain.into(), decline, duration, time_unit: time_unit.into() }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.decline, "decline")?;
        check_finite(self.duration, "duration")?;
        if !(0.0..1.0).contains(&self.decline) {
            return Err(Error::OutOfRange { name: "decline", value: self.decline, range: "[0, 1)" });
        }
        if self.duration <= 0.0 {
            return Err(Error::OutOfRange { name: "duration", value: self.duration, range: "(0, inf)" });
        }
        Ok(())
    }
}

/// `−ln(1 − decline) / duration`, per `time_unit`.
pub fn beta_eff(obs: &DeskillObservation) -> Result<f64> {
    obs.validate()?;
    Ok(-(1.0 - obs.decline).ln() / obs.duration)
}

/// `H(t) = h0 · exp(−β d t)` on `t_grid`.
pub fn predict_decline_curve(beta: f64, d: f64, h0: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    check_finite(beta, "beta")?;
    if beta < 0.0 {
        return Err(Error::OutOfRange { name: "beta", value: beta, range: "[0, inf)" });
    }
    Ok(t_grid.iter().map(|&t| h0 * (-beta * d * t).exp()).collect())
}
