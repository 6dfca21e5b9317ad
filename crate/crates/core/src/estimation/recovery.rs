//! What each fitted model predicts once delegation is removed.
//!
//! The capability ODE continues from its state at removal with `D = 0`, relearning
//! only at the fitted rate α. The phenomenological models carry no state: read as
//! functions of cumulative exposure, removing the exposure and relearning at the
//! fitted rate runs their curves backwards, i.e. effective time
//! `τ(t) = max(2·t_r − t, t_start)` after removal, which is symmetric recovery.

use serde::Serialize;

use super::alt;
use super::data::Driver;
use super::fit::{FitResult, ModelKind};
use super::pisa::integrate_driven;
use crate::error::{Error, Result};
use crate::ode::{integrate, interior_saddle, ModelParams, SystemState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeRecovery {
    pub times: Vec<f64>,
    /// Capability (score / h_max) along the post-removal trajectory.
    pub h: Vec<f64>,
    pub h_at_removal: f64,
    pub gain: f64,
    /// `H` of the interior saddle for the fitted rates at baseline γ, δ, K.
    pub saddle_h: Option<f64>,
    pub below_saddle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AltRecovery {
    pub model_kind: ModelKind,
    pub times: Vec<f64>,
    pub scores: Vec<f64>,
    pub baseline: f64,
    pub at_removal: f64,
    /// Fraction of the gap `baseline − at_removal` closed by the end of the horizon.
    pub closure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryComparison {
    pub removal_year: f64,
    pub horizon: f64,
    pub ode: OdeRecovery,
    pub alternatives: Vec<AltRecovery>,
}

/// `ode` must be a single-series ODE fit to `years` (its first year is the start of
/// exposure); `alternatives` are single-series comparison fits.
pub fn recovery_comparison(
    ode: &FitResult,
    alternatives: &[FitResult],
    years: &[f64],
    driver: &Driver,
    removal_year: f64,
    horizon: f64,
) -> Result<RecoveryComparison> {
    let t_start = *years.first().ok_or_else(|| Error::InvalidData("no observation years".into()))?;
    if removal_year < t_start || horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::InvalidData("removal must not precede the first observation and horizon must be positive".into()));
    }
    let p = |n: &str| ode.param(n).ok_or_else(|| Error::InvalidData(format!("ODE fit lacks parameter {n}")));
    let (alpha, beta, h_max) = (p("alpha")?, p("beta")?, p("h_max")?);
    let epsilon = 0.01;
    let h0 = ode.observed[0] / h_max;
    let h_r = integrate_driven(alpha, beta, epsilon, h0, t_start, &[removal_year], driver, 0.1)[0];

    let params = ModelParams { alpha, beta, epsilon, ..ModelParams::baseline() };
    let dt = 0.1;
    let traj = integrate(&params, SystemState::new(h_r, 0.0), horizon, dt)?;
    let h: Vec<f64> = traj.states.iter().map(|s| s.h).collect();
    let saddle_h = interior_saddle(&params).map(|s| s.location.h);
    let ode_rec = OdeRecovery {
        times: traj.times.iter().map(|t| removal_year + t).collect(),
        gain: h[h.len() - 1] - h_r,
        h,
        h_at_removal: h_r,
        saddle_h,
        below_saddle: saddle_h.is_some_and(|s| h_r < s),
    };

    let alternatives = alternatives
        .iter()
        .map(|fit| {
            let kind = fit.model_kind;
            let times: Vec<f64> = (0..=horizon.ceil() as usize).map(|i| removal_year + (i as f64).min(horizon)).collect();
            let scores = times
                .iter()
                .map(|&t| alt::predict(kind, fit, (2.0 * removal_year - t).max(t_start)))
                .collect::<Result<Vec<_>>>()?;
            let baseline = alt::predict(kind, fit, t_start)?;
            let at_removal = scores[0];
            let gap = baseline - at_removal;
            let closure = if gap.abs() < 1e-12 { 1.0 } else { (scores[scores.len() - 1] - at_removal) / gap };
            Ok(AltRecovery { model_kind: kind, times, scores, baseline, at_removal, closure })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RecoveryComparison { removal_year, horizon, ode: ode_rec, alternatives })
}
