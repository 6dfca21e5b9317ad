//! Parallel, reproducible Monte Carlo sweeps.
//!
//! Work is split into `(grid point, replicate)` tasks and executed on a rayon pool
//! of configurable size. Replicate `r` of the point with index `p` is seeded with
//! [`grid_seed`]`(base, p, r)`, and results are written back by index, so the output
//! is bit-identical for any worker count.

mod curves;
mod landscape;
mod threshold;

pub use curves::{antifragility_curve, policy_curve, AntifragilityRow, PolicyRow};
pub use landscape::{
    cost_to_gamma, epsilon_sweep, gamma_delta_grid, historical_presets, initial_condition_grid, EpsilonSweep,
    GammaDeltaGrid, HistoricalMarker, HistoricalPreset, InitialConditionGrid, LandscapeOptions,
};
pub use threshold::{
    default_k_grid, detect_k_star, k_crisis_heatmap, k_sweep, sensitivity_suite, CurvePoint, Heatmap, KStar, KSweep, SensitivityParam,
    SensitivityResult,
};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm::{run_unchecked, AbmConfig};
use crate::error::{Error, Result};
use crate::rng::grid_seed;
use crate::stats::{linspace, EnsembleStats};

/// A rayon pool plus a counter of executed ABM runs.
#[derive(Clone)]
pub struct Executor {
    pool: Arc<rayon::ThreadPool>,
    runs: Arc<AtomicUsize>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("threads", &self.threads())
            .field("runs", &self.runs_executed())
            .finish()
    }
}

impl Executor {
    /// `None` uses one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(Error::OutOfRange { name: "threads", value: 0.0, range: "[1, inf)" });
            }
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::InvalidSweep(format!("thread pool: {e}")))?;
        Ok(Self { pool: Arc::new(pool), runs: Arc::new(AtomicUsize::new(0)) })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Total ABM runs executed through this executor.
    pub fn runs_executed(&self) -> usize {
        self.runs.load(Ordering::Relaxed)
    }

    /// Runs `f` inside the pool, so nested rayon calls use its workers.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Which ensemble summary a sweep reports as its headline value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    Median,
    Mean,
}

impl Statistic {
    pub fn of(self, s: &EnsembleStats) -> f64 {
        match self {
            Statistic::Median => s.median,
            Statistic::Mean => s.mean,
        }
    }
}

/// One grid point: a seed index and the configuration to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: u64,
    pub config: AbmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub index: u64,
    pub values: Vec<f64>,
    pub stats: EnsembleStats,
}

/// Runs `replicates` ABM replicates at every point and returns results in the
/// order of `points`.
pub fn run_points(exec: &Executor, points: &[GridPoint], replicates: usize, base_seed: u64) -> Result<Vec<PointResult>> {
    if replicates == 0 {
        return Err(Error::InvalidSweep("replicates must be at least 1".into()));
    }
    for p in points {
        p.config.validate()?;
    }
    let total = points.len() * replicates;
    let runs = &exec.runs;
    let flat: Vec<f64> = exec.install(|| {
        (0..total)
            .into_par_iter()
            .map(|task| {
                let p = &points[task / replicates];
                let r = (task % replicates) as u64;
                let out = run_unchecked(&p.config, grid_seed(base_seed, p.index, r)).equilibrium_h;
                runs.fetch_add(1, Ordering::Relaxed);
                out
            })
            .collect()
    });
    Ok(points
        .iter()
        .zip(flat.chunks(replicates))
        .map(|(p, vals)| PointResult { index: p.index, values: vals.to_vec(), stats: EnsembleStats::from_values(vals) })
        .collect())
}

/// A sweepable configuration field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    KAi,
    PCrisis,
    PracticeFraction,
    TurnoverRate,
    Alpha,
    Beta,
    Gamma,
    Delta,
    Epsilon,
    Scope,
}

impl SweepParam {
    pub fn apply(self, config: &mut AbmConfig, v: f64) {
        match self {
            SweepParam::KAi => config.params.k_ai = v,
            SweepParam::PCrisis => config.p_crisis = v,
            SweepParam::PracticeFraction => config.practice_fraction = v,
            SweepParam::TurnoverRate => config.turnover_rate = v,
            SweepParam::Alpha => config.params.alpha = v,
            SweepParam::Beta => config.params.beta = v,
            SweepParam::Gamma => config.params.gamma = v,
            SweepParam::Delta => config.params.delta = v,
            SweepParam::Epsilon => config.params.epsilon = v,
            SweepParam::Scope => config.params.scope = v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::KAi => "k_ai",
            SweepParam::PCrisis => "p_crisis",
            SweepParam::PracticeFraction => "practice_fraction",
            SweepParam::TurnoverRate => "turnover_rate",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::Delta => "delta",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Scope => "scope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }
}

/// A one- or two-axis grid over [`AbmConfig`] fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub replicates: usize,
    pub base_config: AbmConfig,
    #[serde(default)]
    pub statistic: Statistic,
}

/// Flattened sweep output; for two axes the second axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    pub coords: Vec<Vec<f64>>,
    pub statistic: Statistic,
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn headline(&self) -> Vec<f64> {
        self.points.iter().map(|p| self.statistic.of(&p.stats)).collect()
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidSweep(format!("expected 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidSweep("both axes sweep the same parameter".into()));
        }
        for a in &self.axes {
            if a.n < 2 {
                return Err(Error::InvalidSweep(format!("axis {} needs at least 2 points", a.param.name())));
            }
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::InvalidSweep(format!("axis {} has an empty range", a.param.name())));
            }
        }
        if self.replicates == 0 {
            return Err(Error::InvalidSweep("replicates must be at least 1".into()));
        }
        self.grid().iter().try_for_each(|p| p.config.validate())
    }

    /// Grid points in row-major order (last axis fastest) with their coordinates.
    fn grid_with_coords(&self) -> (Vec<GridPoint>, Vec<Vec<f64>>) {
        let vals: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut points = Vec::new();
        let mut coords = Vec::new();
        let n2 = vals.get(1).map_or(1, Vec::len);
        for (i, &v1) in vals[0].iter().enumerate() {
            for j in 0..n2 {
                let mut cfg = self.base_config;
                self.axes[0].param.apply(&mut cfg, v1);
                let mut c = vec![v1];
                if let Some(second) = vals.get(1) {
                    self.axes[1].param.apply(&mut cfg, second[j]);
                    c.push(second[j]);
                }
                points.push(GridPoint { index: (i * n2 + j) as u64, config: cfg });
                coords.push(c);
            }
        }
        (points, coords)
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        self.grid_with_coords().0
    }

    pub fn run(&self, exec: &Executor) -> Result<SweepResult> {
        self.validate()?;
        let (points, coords) = self.grid_with_coords();
        let results = run_points(exec, &points, self.replicates, self.base_config.seed)?;
        Ok(SweepResult { axes: self.axes.clone(), coords, statistic: self.statistic, points: results })
    }
}
