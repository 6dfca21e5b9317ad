//! Mean-field capability/delegation dynamics.
//!
//! The state is a point `(H, D)` in the unit square. With effective delegation
//! `D_eff = s·D`:
//!
//! ```text
//! dH/dt = α (H + ε)(1 − H)(1 − D_eff) − β H D_eff
//! dD/dt = γ (K − H)(1 − D) D + δ D (1 − D) D̄
//! ```
//!
//! where `D̄` is the population-mean delegation (equal to `D` in the mean-field
//! limit). [`ScopeMode::Ceiling`] is an alternative coupling in which scope caps
//! delegation instead (`1 − D` becomes `s − D` in the second equation and `D` enters
//! the first equation directly).

mod two_skill;

pub use two_skill::{simulate_two_skill, Scenario, TwoSkillConfig, TwoSkillState, TwoSkillTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_range, Error, Result};

/// Threshold below which an eigenvalue is treated as zero.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Default integration step.
pub const DEFAULT_DT: f64 = 0.1;
/// Horizon used when classifying basins of attraction.
pub const BASIN_HORIZON: f64 = 2000.0;
/// Recovery-time integrations give up past this time.
pub const RECOVERY_HORIZON: f64 = 1e5;

/// How the delegable-task fraction couples into the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeMode {
    /// Capability sees `s·D`; delegation evolves on the full unit interval.
    #[default]
    Effective,
    /// Delegation saturates at `s`; capability sees `D` directly.
    Ceiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub k_ai: f64,
    pub scope: f64,
    #[serde(default)]
    pub scope_mode: ScopeMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ModelParams {
    /// α=0.05, β=0.03, γ=0.5, δ=0.5, ε=0.01, K=0.9, s=0.7.
    pub const fn baseline() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.03,
            gamma: 0.5,
            delta: 0.5,
            epsilon: 0.01,
            k_ai: 0.9,
            scope: 0.7,
            scope_mode: ScopeMode::Effective,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k_ai = k;
        self
    }

    pub fn with_scope(mut self, s: f64) -> Self {
        self.scope = s;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }

    /// Checks the parameter invariants.
    ///
    /// δ = 0 (no social pressure) is accepted so that sensitivity sweeps can
    /// include the uncoupled limit.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("k_ai", self.k_ai),
            ("scope", self.scope),
        ] {
            check_finite(v, name)?;
        }
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange { name, value: v, range: "(0, inf)" })
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        check_range("delta", self.delta, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("epsilon", self.epsilon, 0.0, 0.5, "[0, 0.5]")?;
        check_range("k_ai", self.k_ai, 0.0, 1.2, "[0, 1.2]")?;
        if !(self.scope > 0.0 && self.scope <= 1.0) {
            return Err(Error::OutOfRange { name: "scope", value: self.scope, range: "(0, 1]" });
        }
        Ok(())
    }

    /// Multiplier applied to `D` in the capability equation.
    #[inline]
    pub fn coupling(&self) -> f64 {
        match self.scope_mode {
            ScopeMode::Effective => self.scope,
            ScopeMode::Ceiling => 1.0,
        }
    }

    /// Upper saturation level of `D` in the delegation equation.
    #[inline]
    pub fn ceiling(&self) -> f64 {
        match self.scope_mode {
            ScopeMode::Effective => 1.0,
            ScopeMode::Ceiling => self.scope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub h: f64,
    pub d: f64,
}

impl SystemState {
    pub const fn new(h: f64, d: f64) -> Self {
        Self { h, d }
    }

    /// Autonomous starting point used by the threshold sweeps.
    pub const AUTONOMOUS: Self = Self::new(0.95, 0.02);
    /// Dependent starting point used for the lower bifurcation branch.
    pub const DEPENDENT: Self = Self::new(0.05, 0.95);

    pub fn clamped(self) -> Self {
        Self { h: self.h.clamp(0.0, 1.0), d: self.d.clamp(0.0, 1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.h, "state.h")?;
        check_finite(self.d, "state.d")?;
        check_range("h", self.h, 0.0, 1.0, "[0, 1]")?;
        check_range("d", self.d, 0.0, 1.0, "[0, 1]")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
}

impl Trajectory {
    pub fn last(&self) -> SystemState {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Right-hand side without validation, for hot loops.
#[inline]
pub(crate) fn rhs_raw(p: &ModelParams, h: f64, d: f64, d_mean: f64) -> (f64, f64) {
    (dh_raw(p, h, p.coupling() * d), dd_raw(p, h, d, d_mean))
}

/// Capability derivative given effective delegation `d_eff`.
#[inline]
pub(crate) fn dh_raw(p: &ModelParams, h: f64, d_eff: f64) -> f64 {
    p.alpha * (h + p.epsilon) * (1.0 - h) * (1.0 - d_eff) - p.beta * h * d_eff
}

#[inline]
pub(crate) fn dd_raw(p: &ModelParams, h: f64, d: f64, d_mean: f64) -> f64 {
    let c = p.ceiling();
    p.gamma * (p.k_ai - h) * (c - d) * d + p.delta * d * (c - d) * d_mean
}

/// Time derivatives `(dH/dt, dD/dt)`; derivatives are not clamped.
pub fn rhs(params: &ModelParams, state: SystemState, d_mean: f64) -> Result<(f64, f64)> {
    check_finite(state.h, "rhs: h")?;
    check_finite(state.d, "rhs: d")?;
    check_finite(d_mean, "rhs: d_mean")?;
    Ok(rhs_raw(params, state.h, state.d, d_mean))
}

#[inline]
fn rk4_raw(p: &ModelParams, h: f64, d: f64, dt: f64) -> (f64, f64) {
    let (k1h, k1d) = rhs_raw(p, h, d, d);
    let (h2, d2) = (h + 0.5 * dt * k1h, d + 0.5 * dt * k1d);
    let (k2h, k2d) = rhs_raw(p, h2, d2, d2);
    let (h3, d3) = (h + 0.5 * dt * k2h, d + 0.5 * dt * k2d);
    let (k3h, k3d) = rhs_raw(p, h3, d3, d3);
    let (h4, d4) = (h + dt * k3h, d + dt * k3d);
    let (k4h, k4d) = rhs_raw(p, h4, d4, d4);
    let nh = h + dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
    let nd = d + dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    (nh, nd)
}

/// One classical RK4 step (mean-field), clamped afterwards.
pub fn rk4_step(params: &ModelParams, state: SystemState, dt: f64) -> SystemState {
    let (h, d) = rk4_raw(params, state.h, state.d, dt);
    SystemState::new(h, d).clamped()
}

/// One explicit-Euler step (mean-field), clamped afterwards.
pub fn euler_step(params: &ModelParams, state: SystemState, dt: f64) -> SystemState {
    let (dh, dd) = rhs_raw(params, state.h, state.d, state.d);
    SystemState::new(state.h + dt * dh, state.d + dt * dd).clamped()
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::OutOfRange { name: "t_end", value: t_end, range: "[dt, inf)" });
    }
    // Tolerate representation error so that e.g. 200 / 0.1 gives 2000 steps.
    Ok((t_end / dt + 1e-9).floor() as usize)
}

/// Fixed-step RK4 from `initial` to `t_end`, clamping to the unit square after
/// every step. Returns `⌊t_end/dt⌋ + 1` states including the initial one.
pub fn integrate(params: &ModelParams, initial: SystemState, t_end: f64, dt: f64) -> Result<Trajectory> {
    initial.validate()?;
    let n = step_count(t_end, dt)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(initial);
    let mut s = initial;
    for i in 1..=n {
        s = checked_step(params, s, dt, i)?;
        times.push(i as f64 * dt);
        states.push(s);
    }
    Ok(Trajectory { times, states })
}

/// Like [`integrate`] but keeps only the final state.
pub fn integrate_final(params: &ModelParams, initial: SystemState, t_end: f64, dt: f64) -> Result<SystemState> {
    initial.validate()?;
    let n = step_count(t_end, dt)?;
    let mut s = initial;
    for i in 1..=n {
        s = checked_step(params, s, dt, i)?;
    }
    Ok(s)
}

#[inline]
fn checked_step(params: &ModelParams, s: SystemState, dt: f64, step: usize) -> Result<SystemState> {
    let (h, d) = rk4_raw(params, s.h, s.d, dt);
    if !(h.is_finite() && d.is_finite()) {
        return Err(Error::IntegrationDiverged { step, time: step as f64 * dt });
    }
    Ok(SystemState::new(h, d).clamped())
}

/// Analytic Jacobian of the mean-field system (with `D̄ = D`).
pub fn jacobian(params: &ModelParams, state: SystemState) -> [[f64; 2]; 2] {
    let p = params;
    let (h, d) = (state.h, state.d);
    let k = p.coupling();
    let c = p.ceiling();
    let growth = p.alpha * (h + p.epsilon) * (1.0 - h);
    let j11 = p.alpha * (1.0 - 2.0 * h - p.epsilon) * (1.0 - k * d) - p.beta * k * d;
    let j12 = -k * (growth + p.beta * h);
    let j21 = -p.gamma * d * (c - d);
    let j22 = p.gamma * (p.k_ai - h) * (c - 2.0 * d) + p.delta * (2.0 * c * d - 3.0 * d * d);
    [[j11, j12], [j21, j22]]
}

/// Eigenvalues of a real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigen2 {
    /// Real parts, ascending.
    pub re: [f64; 2],
    /// Magnitude of the imaginary part (0 for real eigenvalues).
    pub im: f64,
}

pub fn eigenvalues(m: [[f64; 2]; 2]) -> Eigen2 {
    let [[a, b], [c, d]] = m;
    if b == 0.0 || c == 0.0 {
        // Triangular: the diagonal is exact.
        let (lo, hi) = if a <= d { (a, d) } else { (d, a) };
        return Eigen2 { re: [lo, hi], im: 0.0 };
    }
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // Avoid cancellation in the smaller-magnitude root.
        let big = if half_tr >= 0.0 { half_tr + r } else { half_tr - r };
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (lo, hi) = if big <= small { (big, small) } else { (small, big) };
        Eigen2 { re: [lo, hi], im: 0.0 }
    } else {
        Eigen2 { re: [half_tr, half_tr], im: (-disc).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    StableNode,
    UnstableNode,
    Saddle,
    Marginal,
}

impl Stability {
    /// Classification by the signs of the (real parts of the) eigenvalues.
    pub fn from_eigenvalues(re: [f64; 2]) -> Self {
        if re.iter().any(|l| l.abs() < MARGINAL_TOL) {
            Stability::Marginal
        } else if re[0] < 0.0 && re[1] < 0.0 {
            Stability::StableNode
        } else if re[0] > 0.0 && re[1] > 0.0 {
            Stability::UnstableNode
        } else {
            Stability::Saddle
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FixedPointLabel {
    FP1,
    FP2,
    FP3,
    #[serde(rename = "interior")]
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub label: FixedPointLabel,
    pub location: SystemState,
    /// Eigenvalues in the order of the closed-form expressions (H direction first)
    /// for boundary points, ascending for the interior saddle.
    pub eigenvalues: [f64; 2],
    pub stability: Stability,
    /// True when ε > 0 means the point is not an exact equilibrium of the
    /// regularised system; eigenvalues are then reported under ε = 0.
    pub regularized_away: bool,
}

impl FixedPointReport {
    fn new(label: FixedPointLabel, location: SystemState, eigenvalues: [f64; 2], regularized_away: bool) -> Self {
        Self {
            label,
            location,
            eigenvalues,
            stability: Stability::from_eigenvalues(eigenvalues),
            regularized_away,
        }
    }
}

/// Closed-form analysis of the three corner equilibria.
///
/// * FP1 `(0, 0)`: eigenvalues `(α, γ K c)` with ε = 0.
/// * FP2 `(1, 0)`: `(−α(1+ε), γ c (K−1))`.
/// * FP3 `(0, c)`: `(α(1−ε)(1−k c) − β k c, −c(γK + δc))`, which is `(−β, −(γK+δ))`
///   at full scope.
///
/// Here `k` is [`ModelParams::coupling`] and `c` is [`ModelParams::ceiling`].
pub fn boundary_fixed_points(params: &ModelParams) -> [FixedPointReport; 3] {
    let p = params;
    let k = p.coupling();
    let c = p.ceiling();
    let eps_active = p.epsilon > 0.0;

    let fp1 = FixedPointReport::new(
        FixedPointLabel::FP1,
        SystemState::new(0.0, 0.0),
        [p.alpha, p.gamma * p.k_ai * c],
        eps_active,
    );
    let fp2 = FixedPointReport::new(
        FixedPointLabel::FP2,
        SystemState::new(1.0, 0.0),
        [-p.alpha * (1.0 + p.epsilon), p.gamma * c * (p.k_ai - 1.0)],
        false,
    );
    // At (0, c) the H-derivative is αε(1 − k c), which vanishes only at full coupling.
    let fp3_residual = p.alpha * p.epsilon * (1.0 - k * c);
    let fp3 = FixedPointReport::new(
        FixedPointLabel::FP3,
        SystemState::new(0.0, c),
        [
            p.alpha * (1.0 - p.epsilon) * (1.0 - k * c) - p.beta * k * c,
            -c * (p.gamma * p.k_ai + p.delta * c),
        ],
        fp3_residual != 0.0,
    );
    [fp1, fp2, fp3]
}

/// Sampled nullclines `D*(H)`. Entries are `None` where the curve leaves the
/// physical domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nullclines {
    pub h: Vec<f64>,
    pub h_nullcline: Vec<Option<f64>>,
    pub d_nullcline: Vec<Option<f64>>,
}

/// `D` on the capability nullcline at `h`.
///
/// With ε = 0 the common factor H is cancelled so the value at `H = 0` is the
/// limit `α / (k(α + β))`.
pub fn h_nullcline_value(p: &ModelParams, h: f64) -> f64 {
    let k = p.coupling();
    if p.epsilon == 0.0 {
        let a = p.alpha * (1.0 - h);
        a / (k * (a + p.beta))
    } else {
        let a = p.alpha * (h + p.epsilon) * (1.0 - h);
        a / (k * (a + p.beta * h))
    }
}

/// `D` on the interior delegation nullcline at `h`; may be negative.
/// Undefined (NaN) when δ = 0.
pub fn d_nullcline_value(p: &ModelParams, h: f64) -> f64 {
    p.gamma * (h - p.k_ai) / p.delta
}

pub fn nullclines(params: &ModelParams, h_grid: &[f64]) -> Result<Nullclines> {
    for &h in h_grid {
        check_finite(h, "nullclines: h")?;
        check_range("h", h, 0.0, 1.0, "[0, 1]")?;
    }
    let c = params.ceiling();
    let in_domain = |v: f64| (v.is_finite() && (0.0..=c).contains(&v)).then_some(v);
    Ok(Nullclines {
        h: h_grid.to_vec(),
        h_nullcline: h_grid.iter().map(|&h| in_domain(h_nullcline_value(params, h))).collect(),
        d_nullcline: h_grid
            .iter()
            .map(|&h| if params.delta > 0.0 { in_domain(d_nullcline_value(params, h)) } else { None })
            .collect(),
    })
}

/// Locates the interior saddle by bisection on the nullcline difference over
/// `H ∈ (K + 1e-6, 1 − 1e-6)`, to tolerance 1e-10.
pub fn interior_saddle(params: &ModelParams) -> Option<FixedPointReport> {
    let p = params;
    let c = p.ceiling();
    let (h, d) = if p.delta == 0.0 {
        // Without social pressure the delegation nullcline is the vertical line H = K.
        if !(p.k_ai > 0.0 && p.k_ai < 1.0) {
            return None;
        }
        (p.k_ai, h_nullcline_value(p, p.k_ai))
    } else {
        let lo0 = p.k_ai + 1e-6;
        let hi0 = 1.0 - 1e-6;
        if lo0 >= hi0 {
            return None;
        }
        let g = |h: f64| h_nullcline_value(p, h) - d_nullcline_value(p, h);
        let (mut lo, mut hi) = (lo0, hi0);
        let (g_lo, g_hi) = (g(lo), g(hi));
        if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo.signum() == g_hi.signum() {
            return None;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        (h, d_nullcline_value(p, h))
    };
    if !(d > 0.0 && d < c && h > 0.0 && h < 1.0) {
        return None;
    }
    let loc = SystemState::new(h, d);
    let eig = eigenvalues(jacobian(p, loc));
    Some(FixedPointReport::new(FixedPointLabel::Interior, loc, eig.re, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basin {
    Autonomous,
    Dependent,
    Undecided,
}

impl Basin {
    pub fn of(state: SystemState) -> Self {
        if state.h > 0.9 && state.d < 0.1 {
            Basin::Autonomous
        } else if state.h < 0.1 && state.d > 0.9 {
            Basin::Dependent
        } else {
            Basin::Undecided
        }
    }
}

/// Integrates to t = 2000 and labels the end state.
pub fn classify_basin(params: &ModelParams, initial: SystemState) -> Result<Basin> {
    Ok(Basin::of(integrate_final(params, initial, BASIN_HORIZON, DEFAULT_DT)?))
}

/// Long-horizon equilibrium capability for each `K` in `k_grid`.
pub fn equilibrium_vs_k(params: &ModelParams, k_grid: &[f64], initial: SystemState) -> Result<Vec<(f64, f64)>> {
    k_grid
        .iter()
        .map(|&k| {
            check_range("k_ai", k, 0.0, 1.2, "[0, 1.2]")?;
            let s = integrate_final(&params.with_k(k), initial, BASIN_HORIZON, DEFAULT_DT)?;
            Ok((k, s.h))
        })
        .collect()
}

/// Time for `dH/dt = α(H+ε)(1−H)(1−s d) − β H s d` (fixed delegation `d`) to carry
/// capability from `h_start` to `h_target`.
///
/// RK4 with step 0.01 and linear interpolation inside the crossing step.
pub fn recovery_time(params: &ModelParams, h_start: f64, h_target: f64, d_fixed: f64) -> Result<f64> {
    check_finite(h_start, "h_start")?;
    check_finite(h_target, "h_target")?;
    check_finite(d_fixed, "d_fixed")?;
    if !(0.0..=1.0).contains(&h_start) || !(0.0..=1.0).contains(&h_target) || h_start > h_target {
        return Err(Error::OutOfRange { name: "h_start", value: h_start, range: "0 <= h_start <= h_target <= 1" });
    }
    if !(0.0..1.0).contains(&d_fixed) {
        return Err(Error::OutOfRange { name: "d_fixed", value: d_fixed, range: "[0, 1)" });
    }
    if h_start == h_target {
        return Ok(0.0);
    }
    let p = params;
    let d_eff = p.coupling() * d_fixed;
    let f = |h: f64| p.alpha * (h + p.epsilon) * (1.0 - h) * (1.0 - d_eff) - p.beta * h * d_eff;

    // The flow is one-dimensional: any zero of f on the path is a barrier.
    const SCAN: usize = 4096;
    for i in 0..=SCAN {
        let h = h_start + (h_target - h_start) * i as f64 / SCAN as f64;
        // The target itself may sit on a root (e.g. H = 1); reaching it is asymptotic.
        if f(h) <= 0.0 {
            return Err(Error::Unreachable { target: h_target, stalled_at: h });
        }
    }

    const DT: f64 = 0.01;
    let max_steps = (RECOVERY_HORIZON / DT).ceil() as usize;
    let mut h = h_start;
    for i in 0..max_steps {
        let k1 = f(h);
        let k2 = f(h + 0.5 * DT * k1);
        let k3 = f(h + 0.5 * DT * k2);
        let k4 = f(h + DT * k3);
        let next = (h + DT / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).min(1.0);
        if !next.is_finite() {
            return Err(Error::IntegrationDiverged { step: i + 1, time: (i + 1) as f64 * DT });
        }
        if next >= h_target {
            let frac = (h_target - h) / (next - h);
            return Ok((i as f64 + frac) * DT);
        }
        if next <= h {
            return Err(Error::Unreachable { target: h_target, stalled_at: h });
        }
        h = next;
    }
    Err(Error::ExceedsHorizon { target: h_target, horizon: RECOVERY_HORIZON })
}

/// Preset for recovery-time comparisons: α = 1, β = 0.5, no delegation.
pub fn recovery_preset(epsilon: f64) -> ModelParams {
    ModelParams { alpha: 1.0, beta: 0.5, ..ModelParams::baseline() }.with_epsilon(epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn full_scope() -> ModelParams {
        ModelParams::baseline().with_scope(1.0)
    }

    #[test]
    fn corner_derivatives() {
        let p = full_scope();
        assert_eq!(rhs(&p, SystemState::new(1.0, 0.0), 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(rhs(&p, SystemState::new(0.0, 1.0), 1.0).unwrap(), (0.0, 0.0));
        let (dh, _) = rhs(&p, SystemState::new(0.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(dh, 5e-4, epsilon = 1e-15);
    }

    #[test]
    fn rhs_rejects_nan() {
        assert!(rhs(&full_scope(), SystemState::new(f64::NAN, 0.0), 0.0).is_err());
    }

    #[test]
    fn validation_ranges() {
        assert!(ModelParams::baseline().validate().is_ok());
        assert!(ModelParams::baseline().with_k(1.5).validate().is_err());
        assert!(ModelParams::baseline().with_scope(0.0).validate().is_err());
        assert!(ModelParams { delta: 0.0, ..ModelParams::baseline() }.validate().is_ok());
        assert!(ModelParams { alpha: 0.0, ..ModelParams::baseline() }.validate().is_err());
        assert!(ModelParams::baseline().with_epsilon(0.6).validate().is_err());
    }

    #[test]
    fn trajectory_length_and_fixed_start() {
        let tr = integrate(&full_scope(), SystemState::new(1.0, 0.0), 10.0, 0.1).unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.states.iter().all(|s| *s == SystemState::new(1.0, 0.0)));
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bad_step_rejected() {
        let p = full_scope();
        assert!(integrate(&p, SystemState::AUTONOMOUS, 1.0, 0.0).is_err());
        assert!(integrate(&p, SystemState::AUTONOMOUS, 0.05, 0.1).is_err());
    }

    #[test]
    fn fp_closed_forms_full_scope() {
        let p = full_scope();
        let [fp1, fp2, fp3] = boundary_fixed_points(&p);
        assert_abs_diff_eq!(fp2.eigenvalues[1], -0.05, epsilon = 1e-15);
        assert_eq!(fp2.stability, Stability::StableNode);
        assert_eq!(fp3.eigenvalues, [-0.03, -0.95]);
        assert!(!fp3.regularized_away);
        assert!(fp1.regularized_away);
        assert_eq!(fp1.stability, Stability::UnstableNode);
        let marginal = boundary_fixed_points(&p.with_k(1.0))[1];
        assert_eq!(marginal.stability, Stability::Marginal);
    }

    #[test]
    fn eigen_quadratic() {
        let e = eigenvalues([[2.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(e.re[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.re[1], 3.0, epsilon = 1e-14);
        let rot = eigenvalues([[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(rot.re, [0.0, 0.0]);
        assert_abs_diff_eq!(rot.im, 1.0);
    }

    #[test]
    fn h_nullcline_at_zero_without_regularisation() {
        let p = full_scope().with_epsilon(0.0);
        let nc = nullclines(&p, &[0.0, 1.0, p.k_ai]).unwrap();
        assert_abs_diff_eq!(nc.h_nullcline[0].unwrap(), 0.05 / 0.08, epsilon = 1e-15);
        assert_eq!(nc.h_nullcline[1], Some(0.0));
        assert_eq!(nc.d_nullcline[2], Some(0.0));
        assert_eq!(nc.d_nullcline[0], None);
    }

    #[test]
    fn saddle_absent_above_one() {
        assert!(interior_saddle(&ModelParams::baseline().with_k(1.0)).is_none());
        assert!(interior_saddle(&ModelParams::baseline().with_k(1.1)).is_none());
        let s = interior_saddle(&ModelParams::baseline().with_k(0.7)).unwrap();
        assert_eq!(s.stability, Stability::Saddle);
        let (dh, dd) = rhs(&ModelParams::baseline().with_k(0.7), s.location, s.location.d).unwrap();
        assert!(dh.abs() < 1e-8 && dd.abs() < 1e-8);
    }

    #[test]
    fn saddle_without_social_term() {
        let p = ModelParams { delta: 0.0, ..ModelParams::baseline().with_k(0.7) };
        let s = interior_saddle(&p).unwrap();
        assert_eq!(s.location.h, 0.7);
    }

    #[test]
    fn basins_at_k07() {
        let p = full_scope().with_k(0.7);
        assert_eq!(classify_basin(&p, SystemState::AUTONOMOUS).unwrap(), Basin::Autonomous);
        assert_eq!(classify_basin(&p, SystemState::DEPENDENT).unwrap(), Basin::Dependent);
        assert_eq!(classify_basin(&p, SystemState::new(1.0, 0.0)).unwrap(), Basin::Autonomous);
    }

    #[test]
    fn recovery_closed_form() {
        for eps in [0.01, 0.05, 0.25] {
            let t = recovery_time(&recovery_preset(eps), 0.0, 0.5, 0.0).unwrap();
            let exact = ((0.5 + eps) / (eps * 0.5)).ln() / (1.0 + eps);
            assert_abs_diff_eq!(t, exact, epsilon = 1e-4);
        }
        assert_eq!(recovery_time(&recovery_preset(0.01), 0.3, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn recovery_errors_are_distinct() {
        let p = recovery_preset(0.0);
        assert!(matches!(recovery_time(&p, 0.0, 0.5, 0.0), Err(Error::Unreachable { .. })));
        // Heavy delegation: forgetting outweighs learning before H = 0.5.
        let q = ModelParams { scope: 1.0, ..recovery_preset(0.01) };
        assert!(matches!(recovery_time(&q, 0.1, 0.9, 0.9), Err(Error::Unreachable { .. })));
        let slow = ModelParams { alpha: 1e-6, ..recovery_preset(1e-6) };
        assert!(matches!(recovery_time(&slow, 0.0, 0.5, 0.0), Err(Error::ExceedsHorizon { .. })));
    }

    #[test]
    fn ceiling_mode_caps_delegation() {
        let p = ModelParams { scope_mode: ScopeMode::Ceiling, ..ModelParams::baseline().with_k(1.1) };
        let end = integrate_final(&p, SystemState::new(0.5, 0.3), 500.0, 0.1).unwrap();
        assert!(end.d <= p.scope + 1e-9);
        let [_, _, fp3] = boundary_fixed_points(&p);
        assert_eq!(fp3.location.d, p.scope);
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64, 0.0..2.0f64, 0.0..0.5f64, 0.0..1.2f64, 0.05..=1.0f64).prop_map(
            |(alpha, beta, gamma, delta, epsilon, k_ai, scope)| ModelParams {
                alpha,
                beta,
                gamma,
                delta,
                epsilon,
                k_ai,
                scope,
                scope_mode: ScopeMode::Effective,
            },
        )
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(p in arb_params(), h in 0.0..1.0f64, d in 0.0..1.0f64) {
            let j = jacobian(&p, SystemState::new(h, d));
            let e = 1e-6;
            let f = |h: f64, d: f64| rhs_raw(&p, h, d, d);
            let (a, b) = f(h + e, d);
            let (c, dd) = f(h - e, d);
            let (a2, b2) = f(h, d + e);
            let (c2, d2) = f(h, d - e);
            prop_assert!((j[0][0] - (a - c) / (2.0 * e)).abs() < 1e-6);
            prop_assert!((j[1][0] - (b - dd) / (2.0 * e)).abs() < 1e-6);
            prop_assert!((j[0][1] - (a2 - c2) / (2.0 * e)).abs() < 1e-6);
            prop_assert!((j[1][1] - (b2 - d2) / (2.0 * e)).abs() < 1e-6);
        }

        #[test]
        fn integration_stays_in_unit_square(p in arb_params(), h in 0.0..=1.0f64, d in 0.0..=1.0f64) {
            let tr = integrate(&p, SystemState::new(h, d), 50.0, 0.5).unwrap();
            for s in &tr.states {
                prop_assert!((0.0..=1.0).contains(&s.h) && (0.0..=1.0).contains(&s.d));
            }
        }

        #[test]
        fn stability_label_consistent(a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let st = Stability::from_eigenvalues([a, b]);
            let marginal = a.abs() < MARGINAL_TOL || b.abs() < MARGINAL_TOL;
            prop_assert_eq!(st == Stability::Marginal, marginal);
            if !marginal {
                prop_assert_eq!(st == Stability::StableNode, a < 0.0 && b < 0.0);
                prop_assert_eq!(st == Stability::UnstableNode, a > 0.0 && b > 0.0);
            }
        }

        #[test]
        fn recovery_monotone_in_epsilon(e1 in 0.01..0.25f64, de in 0.001..0.2f64) {
            let t1 = recovery_time(&recovery_preset(e1), 0.0, 0.5, 0.0).unwrap();
            let t2 = recovery_time(&recovery_preset(e1 + de), 0.0, 0.5, 0.0).unwrap();
            prop_assert!(t2 <= t1);
        }
    }
}
