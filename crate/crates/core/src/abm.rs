//! Agent-based model on a complete graph.
//!
//! Each of `N` agents carries a capability `H_i` and a delegation rate `D_i`. One
//! step runs, in order:
//!
//! 1. **AI availability.** A crisis uniform is drawn every step and fires with
//!    probability `p_crisis`. Mandatory practice fires deterministically on step `i`
//!    when `⌊(i+1)f⌋ > ⌊i f⌋` (so `f = 0.2` is every fifth step). Either event makes
//!    the step AI-free.
//! 2. **Capability.** Each agent draws a uniform and delegates when it falls below
//!    `s·D_i` (zero on AI-free steps). Practising agents gain `α(H+ε)(1−H)·dt`,
//!    delegating agents lose `βH·dt`. Gaussian noise `σ_h` is added, then `H` is
//!    clamped.
//! 3. **Delegation.** Uses the pre-step capability and the pre-step delegation of
//!    every agent (synchronous update): `D_i += dt·[γ(K−H_i)(1−D_i)D_i +
//!    δD_i(1−D_i)D̄_{−i}]` plus noise `σ_d`, then clamp. `D̄_{−i}` is the mean over the
//!    other agents (the agent's own `D` when `N = 1`).
//! 4. **Turnover.** Each agent is replaced with probability `turnover_rate`; the
//!    entrant takes the population-mean `H` (or a fixed value) and the
//!    population-mean `D`.
//!
//! Crises are transient by default: stored `D_i` are untouched.
//! [`AbmConfig::persistent_crisis_reset`] zeroes them instead.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::ode::{dd_raw, dh_raw, ModelParams};
use crate::rng::{mix_seed, SimRng};
use crate::stats::EnsembleStats;

/// Number of final steps averaged into the equilibrium estimate.
pub const EQUILIBRIUM_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryMode {
    PopulationMean,
    Fixed(f64),
}

/// How an agent's delegate-or-practise decision is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelegationDraw {
    #[default]
    Bernoulli,
    /// Replace the draw by its expectation (deterministic mean-field update).
    Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmConfig {
    pub n_agents: usize,
    pub t_steps: usize,
    pub dt: f64,
    pub sigma_h: f64,
    pub sigma_d: f64,
    pub p_crisis: f64,
    pub practice_fraction: f64,
    pub turnover_rate: f64,
    pub entry_mode: EntryMode,
    pub params: ModelParams,
    pub seed: u64,
    pub h_init: f64,
    pub d_init: f64,
    pub h_init_sd: f64,
    pub d_init_sd: f64,
    pub persistent_crisis_reset: bool,
    pub delegation_draw: DelegationDraw,
}

impl Default for AbmConfig {
    fn default() -> Self {
        Self {
            n_agents: 100,
            t_steps: 200,
            dt: 1.0,
            sigma_h: 0.01,
            sigma_d: 0.005,
            p_crisis: 0.05,
            practice_fraction: 0.0,
            turnover_rate: 0.0,
            entry_mode: EntryMode::PopulationMean,
            params: ModelParams::baseline(),
            seed: 42,
            h_init: 0.8,
            d_init: 0.1,
            h_init_sd: 0.05,
            d_init_sd: 0.02,
            persistent_crisis_reset: false,
            delegation_draw: DelegationDraw::Bernoulli,
        }
    }
}

impl AbmConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_agents == 0 {
            return Err(Error::OutOfRange { name: "n_agents", value: 0.0, range: "[1, inf)" });
        }
        if self.t_steps == 0 {
            return Err(Error::OutOfRange { name: "t_steps", value: 0.0, range: "[1, inf)" });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::OutOfRange { name: "dt", value: self.dt, range: "(0, inf)" });
        }
        check_range("sigma_h", self.sigma_h, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("sigma_d", self.sigma_d, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("h_init_sd", self.h_init_sd, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("d_init_sd", self.d_init_sd, 0.0, f64::INFINITY, "[0, inf)")?;
        check_range("p_crisis", self.p_crisis, 0.0, 1.0, "[0, 1]")?;
        check_range("practice_fraction", self.practice_fraction, 0.0, 0.5, "[0, 0.5]")?;
        check_range("turnover_rate", self.turnover_rate, 0.0, 1.0, "[0, 1]")?;
        check_range("h_init", self.h_init, 0.0, 1.0, "[0, 1]")?;
        check_range("d_init", self.d_init, 0.0, 1.0, "[0, 1]")?;
        if let EntryMode::Fixed(h) = self.entry_mode {
            check_range("entry_mode.fixed", h, 0.0, 1.0, "[0, 1]")?;
        }
        Ok(())
    }

    /// Whether the mandatory-practice schedule makes step `i` AI-free.
    pub fn practice_step(&self, i: usize) -> bool {
        let f = self.practice_fraction;
        f > 0.0 && ((i + 1) as f64 * f).floor() > (i as f64 * f).floor()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPopulation {
    pub h: Vec<f64>,
    pub d: Vec<f64>,
}

impl AgentPopulation {
    pub fn mean_h(&self) -> f64 {
        self.h.iter().sum::<f64>() / self.h.len() as f64
    }

    pub fn mean_d(&self) -> f64 {
        self.d.iter().sum::<f64>() / self.d.len() as f64
    }
}

/// Draws the initial population; each agent consumes one normal for `H` then one
/// for `D`.
pub fn init_population(config: &AbmConfig, rng: &mut SimRng) -> AgentPopulation {
    let n = config.n_agents;
    let mut h = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        h.push((config.h_init + config.h_init_sd * rng.normal()).clamp(0.0, 1.0));
        d.push((config.d_init + config.d_init_sd * rng.normal()).clamp(0.0, 1.0));
    }
    AgentPopulation { h, d }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvents {
    pub crisis: bool,
    pub practice: bool,
}

impl StepEvents {
    pub fn ai_free(&self) -> bool {
        self.crisis || self.practice
    }
}

/// Advances the population by one step in place.
pub fn step(pop: &mut AgentPopulation, config: &AbmConfig, step_index: usize, rng: &mut SimRng) -> StepEvents {
    let p = &config.params;
    let dt = config.dt;
    let n = pop.h.len();

    let crisis = rng.uniform() < config.p_crisis;
    let events = StepEvents { crisis, practice: config.practice_step(step_index) };
    let ai_free = events.ai_free();
    let coupling = if ai_free { 0.0 } else { p.coupling() };

    let h_old = pop.h.clone();
    for (h, &d) in pop.h.iter_mut().zip(&pop.d) {
        let u = rng.uniform();
        let next = match config.delegation_draw {
            DelegationDraw::Bernoulli => {
                if u < coupling * d {
                    *h - dt * p.beta * *h
                } else {
                    *h + dt * p.alpha * (*h + p.epsilon) * (1.0 - *h)
                }
            }
            DelegationDraw::Expectation => *h + dt * dh_raw(p, *h, coupling * d),
        };
        *h = (next + config.sigma_h * rng.normal()).clamp(0.0, 1.0);
    }

    let d_sum: f64 = pop.d.iter().sum();
    let d_old = pop.d.clone();
    for (i, d) in pop.d.iter_mut().enumerate() {
        let d_i = d_old[i];
        let d_avg = if n > 1 { (d_sum - d_i) / (n - 1) as f64 } else { d_i };
        let next = d_i + dt * dd_raw(p, h_old[i], d_i, d_avg);
        *d = (next + config.sigma_d * rng.normal()).clamp(0.0, 1.0);
    }

    if ai_free && config.persistent_crisis_reset {
        pop.d.iter_mut().for_each(|d| *d = 0.0);
    }

    if config.turnover_rate > 0.0 {
        let entry_h = match config.entry_mode {
            EntryMode::PopulationMean => pop.mean_h(),
            EntryMode::Fixed(h) => h,
        };
        let entry_d = pop.mean_d();
        for i in 0..n {
            if rng.uniform() < config.turnover_rate {
                pop.h[i] = entry_h;
                pop.d[i] = entry_d;
            }
        }
    }
    events
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub equilibrium_h: f64,
    pub min_h_during_crisis: Option<f64>,
    /// Population-mean H after each step.
    pub mean_h: Vec<f64>,
    /// Population-mean D after each step.
    pub mean_d: Vec<f64>,
    pub crisis_steps: Vec<usize>,
}

/// Runs one replicate with `config.seed`.
pub fn run(config: &AbmConfig) -> Result<RunSummary> {
    config.validate()?;
    Ok(run_unchecked(config, config.seed))
}

/// Runs one replicate with an explicit seed (config assumed valid).
pub(crate) fn run_unchecked(config: &AbmConfig, seed: u64) -> RunSummary {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut pop = init_population(config, &mut rng);
    let mut mean_h = Vec::with_capacity(config.t_steps);
    let mut mean_d = Vec::with_capacity(config.t_steps);
    let mut crisis_steps = Vec::new();
    let mut min_crisis: Option<f64> = None;
    for i in 0..config.t_steps {
        let ev = step(&mut pop, config, i, &mut rng);
        let mh = pop.mean_h();
        mean_h.push(mh);
        mean_d.push(pop.mean_d());
        if ev.crisis {
            crisis_steps.push(i);
            min_crisis = Some(min_crisis.map_or(mh, |m| m.min(mh)));
        }
    }
    let window = EQUILIBRIUM_WINDOW.min(mean_h.len());
    let tail = &mean_h[mean_h.len() - window..];
    RunSummary {
        equilibrium_h: tail.iter().sum::<f64>() / window as f64,
        min_h_during_crisis: min_crisis,
        mean_h,
        mean_d,
        crisis_steps,
    }
}

/// Equilibrium-H values and their summary over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub values: Vec<f64>,
    pub stats: EnsembleStats,
}

/// Replicate `r` is seeded with `mix_seed(config.seed, r)`. Replicates run in
/// parallel on the current rayon pool; results are placed by index.
pub fn run_ensemble(config: &AbmConfig, n_replicates: usize) -> Result<Ensemble> {
    config.validate()?;
    if n_replicates == 0 {
        return Err(Error::OutOfRange { name: "n_replicates", value: 0.0, range: "[1, inf)" });
    }
    let values: Vec<f64> = (0..n_replicates as u64)
        .into_par_iter()
        .map(|r| run_unchecked(config, mix_seed(config.seed, r)).equilibrium_h)
        .collect();
    let stats = EnsembleStats::from_values(&values);
    Ok(Ensemble { values, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{euler_step, SystemState};
    use proptest::prelude::*;

    fn quiet() -> AbmConfig {
        AbmConfig {
            sigma_h: 0.0,
            sigma_d: 0.0,
            h_init_sd: 0.0,
            d_init_sd: 0.0,
            ..AbmConfig::default()
        }
    }

    #[test]
    fn zero_spread_initialisation() {
        let cfg = quiet();
        let pop = init_population(&cfg, &mut SimRng::seed_from_u64(1));
        assert!(pop.h.iter().all(|&h| h == 0.8));
        assert!(pop.d.iter().all(|&d| d == 0.1));
    }

    #[test]
    fn initial_mean_is_tight() {
        // The sample mean has sd 0.005; [0.78, 0.82] is a 4-sigma band.
        for seed in 0..200 {
            let pop = init_population(&AbmConfig::default(), &mut SimRng::seed_from_u64(seed));
            let m = pop.mean_h();
            assert!((0.78..=0.82).contains(&m), "seed {seed}: {m}");
        }
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = AbmConfig { turnover_rate: 0.02, ..AbmConfig::default() };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permanent_crisis_blocks_forgetting() {
        let cfg = AbmConfig { p_crisis: 1.0, ..quiet() };
        let mut rng = SimRng::seed_from_u64(3);
        let mut pop = init_population(&cfg, &mut rng);
        for i in 0..50 {
            let before = pop.h.clone();
            let ev = step(&mut pop, &cfg, i, &mut rng);
            assert!(ev.crisis);
            assert!(pop.h.iter().zip(&before).all(|(a, b)| a >= b));
        }
    }

    #[test]
    fn full_turnover_resets_capability() {
        let cfg = AbmConfig { turnover_rate: 1.0, entry_mode: EntryMode::Fixed(0.5), ..AbmConfig::default() };
        let mut rng = SimRng::seed_from_u64(5);
        let mut pop = init_population(&cfg, &mut rng);
        step(&mut pop, &cfg, 0, &mut rng);
        assert!(pop.h.iter().all(|&h| h == 0.5));
        let md = pop.d[0];
        assert!(pop.d.iter().all(|&d| d == md));
    }

    #[test]
    fn single_agent_expectation_is_euler() {
        for k in [0.5, 0.9, 1.1] {
            let mut cfg = AbmConfig {
                n_agents: 1,
                p_crisis: 0.0,
                delegation_draw: DelegationDraw::Expectation,
                ..quiet()
            };
            cfg.params.k_ai = k;
            let mut rng = SimRng::seed_from_u64(0);
            let mut pop = init_population(&cfg, &mut rng);
            let mut s = SystemState::new(0.8, 0.1);
            for i in 0..200 {
                step(&mut pop, &cfg, i, &mut rng);
                s = euler_step(&cfg.params, s, 1.0);
                assert!((pop.h[0] - s.h).abs() < 1e-12 && (pop.d[0] - s.d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn practice_schedule() {
        let cfg = AbmConfig { practice_fraction: 0.2, ..AbmConfig::default() };
        let fired: Vec<usize> = (0..20).filter(|&i| cfg.practice_step(i)).collect();
        assert_eq!(fired, vec![4, 9, 14, 19]);
        let none = AbmConfig::default();
        assert!((0..100).all(|i| !none.practice_step(i)));
    }

    #[test]
    fn single_replicate_ensemble() {
        let e = run_ensemble(&AbmConfig::default(), 1).unwrap();
        assert_eq!(e.stats.median, e.stats.mean);
        assert_eq!(e.stats.iqr(), 0.0);
    }

    #[test]
    fn safe_region_stays_high() {
        let mut cfg = AbmConfig::default();
        cfg.params.k_ai = 0.5;
        for seed in 0..5 {
            cfg.seed = seed;
            assert!(run(&cfg).unwrap().equilibrium_h > 0.8);
        }
    }

    #[test]
    fn summary_shape() {
        let cfg = AbmConfig { p_crisis: 0.3, ..AbmConfig::default() };
        let s = run(&cfg).unwrap();
        assert_eq!(s.mean_h.len(), 200);
        assert!(!s.crisis_steps.is_empty());
        assert!(s.crisis_steps.iter().all(|&i| i < 200));
        assert!(s.min_h_during_crisis.is_some());
        assert!(run(&AbmConfig { p_crisis: 0.0, ..cfg }).unwrap().min_h_during_crisis.is_none());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(run(&AbmConfig { n_agents: 0, ..AbmConfig::default() }).is_err());
        assert!(run(&AbmConfig { p_crisis: 1.5, ..AbmConfig::default() }).is_err());
        assert!(run(&AbmConfig { practice_fraction: 0.6, ..AbmConfig::default() }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn agents_stay_in_unit_square(
            seed in any::<u64>(),
            k in 0.0..1.2f64,
            crisis in 0.0..1.0f64,
            turnover in 0.0..0.2f64,
            sigma in 0.0..0.3f64,
        ) {
            let mut cfg = AbmConfig {
                n_agents: 20,
                t_steps: 60,
                sigma_h: sigma,
                sigma_d: sigma,
                p_crisis: crisis,
                turnover_rate: turnover,
                seed,
                ..AbmConfig::default()
            };
            cfg.params.k_ai = k;
            let mut rng = SimRng::seed_from_u64(seed);
            let mut pop = init_population(&cfg, &mut rng);
            for i in 0..cfg.t_steps {
                step(&mut pop, &cfg, i, &mut rng);
                prop_assert!(pop.h.iter().chain(&pop.d).all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
