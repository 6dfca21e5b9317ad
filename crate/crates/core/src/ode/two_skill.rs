//! Two skills competing for one time budget.
//!
//! Each skill `i` follows the capability equation with its learning term scaled by
//! the practice time it receives relative to an even split:
//!
//! ```text
//! dH_i/dt = α (p_i / 0.5)(H_i + ε)(1 − H_i) − β H_i s D_i
//! dD_i/dt = γ (K_i − H_i)(1 − D_i) D_i + δ D_i² (1 − D_i)
//! ```
//!
//! * A (no reallocation): `τ = (0.5, 0.5)`, `p_i = 0.5 (1 − s D_i)`.
//! * B (full reallocation): time freed on skill 1 moves to skill 2:
//!   `τ₂ = 0.5 + 0.5 D₁`, `p₁ = 0.5 (1 − s D₁)`, `p₂ = 0.5 (1 + s D₁)(1 − s D₂)`.
//! * C (AI reaches both): like A, but skill 2 uses skill 1's `K`.
//!
//! Scenario A reduces each skill to the one-skill model exactly.

use serde::{Deserialize, Serialize};

use super::{step_count, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSkillState {
    pub h1: f64,
    pub h2: f64,
    pub d1: f64,
    pub d2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl TwoSkillState {
    pub fn aggregate(&self) -> f64 {
        0.5 * (self.h1 + self.h2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSkillConfig {
    /// Parameters for skill 1 (the AI-exposed skill).
    pub skill1: ModelParams,
    /// Parameters for skill 2; its `k_ai` is replaced by skill 1's in scenario C.
    pub skill2: ModelParams,
    pub h0: f64,
    pub d0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TwoSkillConfig {
    fn default() -> Self {
        Self {
            skill1: ModelParams::baseline().with_k(0.95),
            skill2: ModelParams::baseline().with_k(0.5),
            h0: 0.8,
            d0: 0.1,
            t_end: 200.0,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSkillTrajectory {
    pub scenario: Scenario,
    pub times: Vec<f64>,
    pub states: Vec<TwoSkillState>,
}

impl TwoSkillTrajectory {
    pub fn last(&self) -> TwoSkillState {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn aggregate(&self) -> Vec<f64> {
        self.states.iter().map(TwoSkillState::aggregate).collect()
    }
}

type Vec4 = [f64; 4];

struct Dynamics {
    p1: ModelParams,
    p2: ModelParams,
    reallocate: bool,
}

impl Dynamics {
    fn budget(&self, d1: f64) -> (f64, f64) {
        if self.reallocate {
            (0.5 - 0.5 * d1, 0.5 + 0.5 * d1)
        } else {
            (0.5, 0.5)
        }
    }

    fn practice(&self, d1: f64, d2: f64) -> (f64, f64) {
        let s1 = self.p1.scope * d1;
        let s2 = self.p2.scope * d2;
        if self.reallocate {
            (0.5 * (1.0 - s1), 0.5 * (1.0 + s1) * (1.0 - s2))
        } else {
            (0.5 * (1.0 - s1), 0.5 * (1.0 - s2))
        }
    }

    fn rhs(&self, [h1, h2, d1, d2]: Vec4) -> Vec4 {
        let (pr1, pr2) = self.practice(d1, d2);
        let skill = |p: &ModelParams, h: f64, d: f64, share: f64| {
            let dh = p.alpha * (share / 0.5) * (h + p.epsilon) * (1.0 - h) - p.beta * h * p.scope * d;
            let dd = p.gamma * (p.k_ai - h) * (1.0 - d) * d + p.delta * d * (1.0 - d) * d;
            (dh, dd)
        };
        let (dh1, dd1) = skill(&self.p1, h1, d1, pr1);
        let (dh2, dd2) = skill(&self.p2, h2, d2, pr2);
        [dh1, dh2, dd1, dd2]
    }

    fn state(&self, x: Vec4) -> TwoSkillState {
        let (tau1, tau2) = self.budget(x[2]);
        TwoSkillState { h1: x[0], h2: x[1], d1: x[2], d2: x[3], tau1, tau2 }
    }
}

fn axpy(a: f64, x: Vec4, y: Vec4) -> Vec4 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2], y[3] + a * x[3]]
}

/// RK4 integration of one scenario, clamped to the unit interval after each step.
pub fn simulate_two_skill(config: &TwoSkillConfig, scenario: Scenario) -> Result<TwoSkillTrajectory> {
    config.skill1.validate()?;
    config.skill2.validate()?;
    let mut p2 = config.skill2;
    if scenario == Scenario::C {
        p2.k_ai = config.skill1.k_ai;
    }
    let dyns = Dynamics { p1: config.skill1, p2, reallocate: scenario == Scenario::B };
    let n = step_count(config.t_end, config.dt)?;
    let dt = config.dt;

    let h0 = config.h0.clamp(0.0, 1.0);
    let d0 = config.d0.clamp(0.0, 1.0);
    let mut x: Vec4 = [h0, h0, d0, d0];
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(dyns.state(x));
    for i in 1..=n {
        let k1 = dyns.rhs(x);
        let k2 = dyns.rhs(axpy(0.5 * dt, k1, x));
        let k3 = dyns.rhs(axpy(0.5 * dt, k2, x));
        let k4 = dyns.rhs(axpy(dt, k3, x));
        for j in 0..4 {
            x[j] = (x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])).clamp(0.0, 1.0);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: i, time: i as f64 * dt });
        }
        times.push(i as f64 * dt);
        states.push(dyns.state(x));
    }
    Ok(TwoSkillTrajectory { scenario, times, states })
}
