//! Locating the critical AI capability K*.

use serde::{Deserialize, Serialize};

use super::{run_points, Executor, GridPoint, Statistic};
use crate::abm::AbmConfig;
use crate::error::{Error, Result};
use crate::stats::linspace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k: f64,
    pub value: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KStar {
    pub k_star: f64,
    /// `|dH/dK|` at `k_star`.
    pub max_gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweep {
    pub curve: Vec<CurvePoint>,
    /// `|dH/dK|` at every grid point (one-sided at the ends).
    pub gradient: Vec<f64>,
    /// Indices `i` where the curve rises from point `i` to `i + 1`.
    pub non_monotone: Vec<usize>,
    pub smoothed: bool,
    pub k_star: std::result::Result<KStar, Error>,
}

/// Finds the grid point of steepest descent of `h(k)`.
///
/// Interior points use central differences and the two ends one-sided ones; a
/// maximum on an end point is rejected with [`Error::EndpointMaximum`] because
/// the transition may lie outside the grid.
pub fn detect_k_star(k: &[f64], h: &[f64]) -> (Vec<f64>, std::result::Result<KStar, Error>) {
    let n = k.len();
    if n < 3 || h.len() != n {
        return (vec![], Err(Error::InvalidSweep("K* detection needs at least 3 grid points".into())));
    }
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            ((h[b] - h[a]) / (k[b] - k[a])).abs()
        })
        .collect();
    let (best, &g) = grad
        .iter()
        .enumerate()
        // First index wins ties, keeping the choice deterministic.
        .fold((0, &f64::NEG_INFINITY), |acc, (i, g)| if *g > *acc.1 { (i, g) } else { acc });
    let result = if best == 0 || best == n - 1 {
        Err(Error::EndpointMaximum { k: k[best], gradient: g })
    } else {
        Ok(KStar { k_star: k[best], max_gradient: g })
    };
    (grad, result)
}

fn smooth3(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Ensemble equilibrium capability over `k_grid` and the resulting K*.
///
/// Grid point `i` is seeded with index `i` (offset by `seed_offset`, which lets
/// several sweeps share a base seed without sharing streams).
pub fn k_sweep(
    exec: &Executor,
    base: &AbmConfig,
    k_grid: &[f64],
    replicates: usize,
    statistic: Statistic,
    smoothing: bool,
) -> Result<KSweep> {
    k_sweep_indexed(exec, base, k_grid, replicates, statistic, smoothing, 0)
}

pub(crate) fn k_sweep_indexed(
    exec: &Executor,
    base: &AbmConfig,
    k_grid: &[f64],
    replicates: usize,
    statistic: Statistic,
    smoothing: bool,
    seed_offset: u64,
) -> Result<KSweep> {
    if k_grid.len() < 3 {
        return Err(Error::InvalidSweep("K grid needs at least 3 points".into()));
    }
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSweep("K grid must be strictly increasing".into()));
    }
    let points: Vec<GridPoint> = k_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut config = *base;
            config.params.k_ai = k;
            GridPoint { index: seed_offset + i as u64, config }
        })
        .collect();
    let results = run_points(exec, &points, replicates, base.seed)?;
    let curve: Vec<CurvePoint> = k_grid
        .iter()
        .zip(&results)
        .map(|(&k, r)| CurvePoint { k, value: statistic.of(&r.stats), q25: r.stats.q25, q75: r.stats.q75 })
        .collect();
    let raw: Vec<f64> = curve.iter().map(|c| c.value).collect();
    let values = if smoothing { smooth3(&raw) } else { raw.clone() };
    let non_monotone = raw.windows(2).enumerate().filter(|(_, w)| w[1] > w[0]).map(|(i, _)| i).collect();
    let (gradient, k_star) = detect_k_star(k_grid, &values);
    Ok(KSweep { curve, gradient, non_monotone, smoothed: smoothing, k_star })
}

/// Default K grid: 50 points on [0.50, 0.99].
pub fn default_k_grid() -> Vec<f64> {
    linspace(0.5, 0.99, 50)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub k: Vec<f64>,
    pub p_crisis: Vec<f64>,
    /// `values[c][k]`: statistic at crisis row `c`, capability column `k`.
    pub values: Vec<Vec<f64>>,
    /// Per crisis row, every `K` where the row crosses `level` (linear interpolation).
    pub contour: Vec<Vec<f64>>,
    pub level: f64,
}

impl Heatmap {
    /// First downward crossing of the contour level in each row.
    pub fn first_crossing(&self) -> Vec<Option<f64>> {
        self.contour.iter().map(|c| c.first().copied()).collect()
    }
}

/// Linear-interpolation crossings of `level` along one row.
pub(crate) fn crossings(x: &[f64], y: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..x.len().saturating_sub(1) {
        let (a, b) = (y[i] - level, y[i + 1] - level);
        if a == 0.0 {
            out.push(x[i]);
        } else if a * b < 0.0 {
            out.push(x[i] + (x[i + 1] - x[i]) * a / (a - b));
        }
    }
    if let (Some(&xl), Some(&yl)) = (x.last(), y.last()) {
        if yl == level {
            out.push(xl);
        }
    }
    out
}

/// K × crisis-probability grid. Point index is `row · n_k + column`.
pub fn k_crisis_heatmap(
    exec: &Executor,
    base: &AbmConfig,
    k_grid: &[f64],
    crisis_grid: &[f64],
    replicates: usize,
    statistic: Statistic,
) -> Result<Heatmap> {
    if k_grid.len() < 2 || crisis_grid.len() < 2 {
        return Err(Error::InvalidSweep("heatmap axes need at least 2 points".into()));
    }
    let nk = k_grid.len();
    let mut points = Vec::with_capacity(nk * crisis_grid.len());
    for (c, &pc) in crisis_grid.iter().enumerate() {
        for (j, &k) in k_grid.iter().enumerate() {
            let mut config = *base;
            config.params.k_ai = k;
            config.p_crisis = pc;
            points.push(GridPoint { index: (c * nk + j) as u64, config });
        }
    }
    let results = run_points(exec, &points, replicates, base.seed)?;
    let values: Vec<Vec<f64>> = results.chunks(nk).map(|row| row.iter().map(|r| statistic.of(&r.stats)).collect()).collect();
    let level = 0.5;
    let contour = values.iter().map(|row| crossings(k_grid, row, level)).collect();
    Ok(Heatmap { k: k_grid.to_vec(), p_crisis: crisis_grid.to_vec(), values, contour, level })
}

/// Parameters varied by the sensitivity suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityParam {
    Beta,
    Alpha,
    Delta,
    Scope,
    Gamma,
}

impl SensitivityParam {
    pub const ALL: [SensitivityParam; 5] = [
        SensitivityParam::Beta,
        SensitivityParam::Alpha,
        SensitivityParam::Delta,
        SensitivityParam::Scope,
        SensitivityParam::Gamma,
    ];

    /// Tested range.
    pub fn range(self) -> (f64, f64) {
        match self {
            SensitivityParam::Beta => (0.01, 0.10),
            SensitivityParam::Alpha => (0.02, 0.10),
            SensitivityParam::Delta => (0.0, 2.0),
            SensitivityParam::Scope => (0.3, 0.9),
            SensitivityParam::Gamma => (0.01, 0.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensitivityParam::Beta => "beta",
            SensitivityParam::Alpha => "alpha",
            SensitivityParam::Delta => "delta",
            SensitivityParam::Scope => "scope",
            SensitivityParam::Gamma => "gamma",
        }
    }

    fn apply(self, config: &mut AbmConfig, v: f64) {
        let p = &mut config.params;
        match self {
            SensitivityParam::Beta => p.beta = v,
            SensitivityParam::Alpha => p.alpha = v,
            SensitivityParam::Delta => p.delta = v,
            SensitivityParam::Scope => p.scope = v,
            SensitivityParam::Gamma => p.gamma = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub param: SensitivityParam,
    pub values: Vec<f64>,
    pub sweeps: Vec<KSweep>,
}

impl SensitivityResult {
    /// `(min, max)` of the interior K* values found; `None` if none were found.
    pub fn k_star_range(&self) -> Option<(f64, f64)> {
        let ks: Vec<f64> = self.sweeps.iter().filter_map(|s| s.k_star.as_ref().ok().map(|k| k.k_star)).collect();
        if ks.is_empty() {
            return None;
        }
        Some((ks.iter().copied().fold(f64::INFINITY, f64::min), ks.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
    }

    pub fn all_interior(&self) -> bool {
        self.sweeps.iter().all(|s| s.k_star.is_ok())
    }
}

/// Re-runs the K sweep at `n_values` evenly spaced values of one parameter.
///
/// Sweep `v` uses seed indices `v·10⁴ + i`, keeping every sweep's streams distinct.
pub fn sensitivity_suite(
    exec: &Executor,
    base: &AbmConfig,
    param: SensitivityParam,
    n_values: usize,
    k_grid: &[f64],
    replicates: usize,
) -> Result<SensitivityResult> {
    if n_values < 2 {
        return Err(Error::InvalidSweep("sensitivity suite needs at least 2 values".into()));
    }
    let (lo, hi) = param.range();
    let values = linspace(lo, hi, n_values);
    let mut sweeps = Vec::with_capacity(n_values);
    for (v, &x) in values.iter().enumerate() {
        let mut cfg = *base;
        param.apply(&mut cfg, x);
        sweeps.push(k_sweep_indexed(exec, &cfg, k_grid, replicates, Statistic::Median, false, v as u64 * 10_000)?);
    }
    Ok(SensitivityResult { param, values, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steepest_interior_drop_is_found() {
        let k = [0.5, 0.6, 0.7, 0.8, 0.9];
        let h = [0.9, 0.88, 0.5, 0.2, 0.18];
        let (g, ks) = detect_k_star(&k, &h);
        let ks = ks.unwrap();
        assert_eq!(g.len(), 5);
        assert!((ks.k_star - 0.7).abs() < 1e-12);
        assert!((ks.max_gradient - 3.4).abs() < 1e-9);
    }

    #[test]
    fn endpoint_maximum_is_rejected() {
        let k = [0.5, 0.6, 0.7, 0.8];
        let h = [0.9, 0.1, 0.09, 0.08];
        let (_, ks) = detect_k_star(&k, &h);
        assert!(matches!(ks, Err(Error::EndpointMaximum { .. })));
    }

    #[test]
    fn crossings_interpolate() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 0.0, 1.0];
        assert_eq!(crossings(&x, &y, 0.5), vec![0.5, 1.5]);
        assert!(crossings(&x, &[1.0, 1.0, 1.0], 0.5).is_empty());
    }

    #[test]
    fn smoothing_preserves_constants() {
        assert_eq!(smooth3(&[2.0, 2.0, 2.0, 2.0]), vec![2.0; 4]);
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]), vec![1.5, 1.0, 1.5]);
    }
}
