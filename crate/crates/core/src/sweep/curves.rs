//! Crisis (antifragility) and mandatory-practice response curves.

use serde::Serialize;

use super::{run_points, Executor, GridPoint};
use crate::abm::AbmConfig;
use crate::error::{Error, Result};
use crate::stats::EnsembleStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntifragilityRow {
    pub k: f64,
    pub p_crisis: f64,
    pub stats: EnsembleStats,
    /// Median relative to the crisis-free median at the same `K`.
    pub ratio: f64,
}

/// Ensemble medians over every `(K, crisis)` pair. Point index is
/// `k_index · n_crisis + crisis_index`.
///
/// Ratios are taken against the `p_crisis = 0` entry of `crisis_grid`, which must
/// be present.
pub fn antifragility_curve(
    exec: &Executor,
    base: &AbmConfig,
    k_values: &[f64],
    crisis_grid: &[f64],
    replicates: usize,
) -> Result<Vec<AntifragilityRow>> {
    let zero = crisis_grid
        .iter()
        .position(|&c| c == 0.0)
        .ok_or_else(|| Error::InvalidSweep("crisis grid must contain 0".into()))?;
    let nc = crisis_grid.len();
    let mut points = Vec::with_capacity(k_values.len() * nc);
    for (i, &k) in k_values.iter().enumerate() {
        for (j, &c) in crisis_grid.iter().enumerate() {
            let mut config = *base;
            config.params.k_ai = k;
            config.p_crisis = c;
            points.push(GridPoint { index: (i * nc + j) as u64, config });
        }
    }
    let results = run_points(exec, &points, replicates, base.seed)?;
    let mut rows = Vec::with_capacity(results.len());
    for (i, chunk) in results.chunks(nc).enumerate() {
        let reference = chunk[zero].stats.median;
        for (j, r) in chunk.iter().enumerate() {
            rows.push(AntifragilityRow {
                k: k_values[i],
                p_crisis: crisis_grid[j],
                stats: r.stats,
                ratio: r.stats.median / reference,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyRow {
    pub practice_fraction: f64,
    pub stats: EnsembleStats,
    /// Percent change of the median relative to the first fraction in the grid.
    pub improvement_pct: f64,
}

/// Ensemble medians across mandatory-practice fractions.
pub fn policy_curve(exec: &Executor, base: &AbmConfig, fractions: &[f64], replicates: usize) -> Result<Vec<PolicyRow>> {
    if fractions.is_empty() {
        return Err(Error::InvalidSweep("no practice fractions given".into()));
    }
    let points: Vec<GridPoint> = fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let mut config = *base;
            config.practice_fraction = f;
            GridPoint { index: i as u64, config }
        })
        .collect();
    let results = run_points(exec, &points, replicates, base.seed)?;
    let reference = results[0].stats.median;
    Ok(fractions
        .iter()
        .zip(&results)
        .map(|(&f, r)| PolicyRow {
            practice_fraction: f,
            stats: r.stats,
            improvement_pct: 100.0 * (r.stats.median - reference) / reference,
        })
        .collect())
}
