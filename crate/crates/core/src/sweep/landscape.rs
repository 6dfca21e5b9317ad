//! Deterministic (mean-field) parameter landscapes: recovery time versus ε, the
//! adoption-sensitivity × social-pressure grid with historical reference regimes,
//! and the initial-capability × scope bistability grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Executor;
use crate::error::{Error, Result};
use crate::ode::{integrate_final, recovery_preset, recovery_time, Basin, ModelParams, SystemState, BASIN_HORIZON, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeOptions {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self { horizon: BASIN_HORIZON, dt: DEFAULT_DT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSweep {
    pub epsilon: Vec<f64>,
    pub time: Vec<f64>,
    /// `time(ε_first) / time(ε_last)`.
    pub ratio: f64,
    pub strictly_decreasing: bool,
}

/// Recovery time from `h_start` to `h_target` (no delegation) at each ε, using
/// the recovery preset (α = 1, β = 0.5).
pub fn epsilon_sweep(eps_grid: &[f64], h_start: f64, h_target: f64) -> Result<EpsilonSweep> {
    if eps_grid.len() < 2 {
        return Err(Error::InvalidSweep("epsilon grid needs at least 2 points".into()));
    }
    let time = eps_grid
        .iter()
        .map(|&e| {
            let p = recovery_preset(e);
            p.validate()?;
            recovery_time(&p, h_start, h_target, 0.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let ratio = time[0] / time[time.len() - 1];
    let strictly_decreasing = time.windows(2).all(|w| w[1] < w[0]);
    Ok(EpsilonSweep { epsilon: eps_grid.to_vec(), time, ratio, strictly_decreasing })
}

/// Maps an adoption cost `c` to adoption sensitivity: `γ = clamp(1 − c, 0.01, 1)`.
pub fn cost_to_gamma(cost: f64) -> f64 {
    (1.0 - cost).clamp(0.01, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalPreset {
    pub name: String,
    pub cost: f64,
    pub scope: f64,
}

/// Calculator, Industrial Revolution, Roman administration and AI-2030 regimes.
pub fn historical_presets() -> Vec<HistoricalPreset> {
    [("calculator", 0.99, 0.01), ("industrial-revolution", 0.30, 0.05), ("roman", 0.05, 0.60), ("ai-2030", 0.01, 0.80)]
        .into_iter()
        .map(|(n, c, s)| HistoricalPreset { name: n.to_string(), cost: c, scope: s })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoricalMarker {
    pub name: String,
    pub cost: f64,
    pub gamma: f64,
    pub scope: f64,
    pub k_ai: f64,
    pub h: f64,
    pub d: f64,
    pub basin: Basin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaDeltaGrid {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    /// `h[i][j]`: final capability at `gamma[i]`, `delta[j]`.
    pub h: Vec<Vec<f64>>,
    pub markers: Vec<HistoricalMarker>,
}

fn final_state(p: &ModelParams, initial: SystemState, opts: &LandscapeOptions) -> Result<SystemState> {
    integrate_final(p, initial, opts.horizon, opts.dt)
}

/// Long-horizon capability over a γ × δ grid (all other parameters from `base`),
/// plus the historical regimes evaluated at capability `marker_k` with their own
/// γ (from cost) and scope.
pub fn gamma_delta_grid(
    exec: &Executor,
    base: &ModelParams,
    gamma_grid: &[f64],
    delta_grid: &[f64],
    initial: SystemState,
    marker_k: f64,
    opts: &LandscapeOptions,
) -> Result<GammaDeltaGrid> {
    base.validate()?;
    let nd = delta_grid.len();
    let flat: Vec<f64> = exec.install(|| {
        (0..gamma_grid.len() * nd)
            .into_par_iter()
            .map(|idx| {
                let p = ModelParams { gamma: gamma_grid[idx / nd], delta: delta_grid[idx % nd], ..*base };
                p.validate()?;
                final_state(&p, initial, opts).map(|s| s.h)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let h = flat.chunks(nd.max(1)).map(<[f64]>::to_vec).collect();
    let markers = historical_presets()
        .into_iter()
        .map(|pre| {
            let gamma = cost_to_gamma(pre.cost);
            let p = ModelParams { gamma, scope: pre.scope, k_ai: marker_k, ..*base };
            p.validate()?;
            let s = final_state(&p, initial, opts)?;
            Ok(HistoricalMarker {
                name: pre.name,
                cost: pre.cost,
                gamma,
                scope: pre.scope,
                k_ai: marker_k,
                h: s.h,
                d: s.d,
                basin: Basin::of(s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GammaDeltaGrid { gamma: gamma_grid.to_vec(), delta: delta_grid.to_vec(), h, markers })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialConditionGrid {
    pub h0: Vec<f64>,
    pub scope: Vec<f64>,
    /// `h[i][j]`: final capability from `h0[i]` at `scope[j]`.
    pub h: Vec<Vec<f64>>,
    pub basin: Vec<Vec<Basin>>,
}

impl InitialConditionGrid {
    /// Scope columns in which both autonomous and dependent outcomes occur.
    pub fn bistable_columns(&self) -> Vec<usize> {
        (0..self.scope.len())
            .filter(|&j| {
                let col = self.basin.iter().map(|r| r[j]);
                col.clone().any(|b| b == Basin::Autonomous) && col.into_iter().any(|b| b == Basin::Dependent)
            })
            .collect()
    }

    /// Scope columns where a higher starting capability ends lower.
    pub fn non_monotone_columns(&self) -> Vec<usize> {
        (0..self.scope.len())
            .filter(|&j| self.h.windows(2).any(|w| w[1][j] < w[0][j] - 1e-9))
            .collect()
    }
}

/// Long-horizon outcome from `(h0, d0)` across scope values.
pub fn initial_condition_grid(
    exec: &Executor,
    base: &ModelParams,
    h0_grid: &[f64],
    scope_grid: &[f64],
    d0: f64,
    opts: &LandscapeOptions,
) -> Result<InitialConditionGrid> {
    base.validate()?;
    let ns = scope_grid.len();
    let flat: Vec<SystemState> = exec.install(|| {
        (0..h0_grid.len() * ns)
            .into_par_iter()
            .map(|idx| {
                let p = base.with_scope(scope_grid[idx % ns]);
                p.validate()?;
                final_state(&p, SystemState::new(h0_grid[idx / ns], d0), opts)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<&[SystemState]> = flat.chunks(ns.max(1)).collect();
    Ok(InitialConditionGrid {
        h0: h0_grid.to_vec(),
        scope: scope_grid.to_vec(),
        h: rows.iter().map(|r| r.iter().map(|s| s.h).collect()).collect(),
        basin: rows.iter().map(|r| r.iter().map(|&s| Basin::of(s)).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_mapping() {
        assert_eq!(cost_to_gamma(0.99), 0.01_f64.max(1.0 - 0.99));
        assert_eq!(cost_to_gamma(0.0), 1.0);
        assert_eq!(cost_to_gamma(2.0), 0.01);
        let g: Vec<f64> = historical_presets().iter().map(|p| cost_to_gamma(p.cost)).collect();
        assert!((g[1] - 0.7).abs() < 1e-12 && (g[3] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn epsilon_curve_decreases() {
        let sw = epsilon_sweep(&[0.01, 0.05, 0.1, 0.25, 0.5], 0.0, 0.5).unwrap();
        assert!(sw.strictly_decreasing);
        assert!(sw.time[4] < sw.time[3]);
    }

    #[test]
    fn small_initial_condition_grid() {
        let exec = Executor::new(Some(2)).unwrap();
        let g = initial_condition_grid(
            &exec,
            &ModelParams::baseline(),
            &[0.01, 0.5, 1.0],
            &[0.05, 0.8],
            0.05,
            &LandscapeOptions::default(),
        )
        .unwrap();
        assert_eq!(g.basin[2][0], Basin::Autonomous);
        assert_eq!(g.basin[0][1], Basin::Dependent);
        assert_eq!(g.bistable_columns(), vec![1]);
        assert!(g.non_monotone_columns().is_empty());
    }
}
