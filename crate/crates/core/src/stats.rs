//! Small descriptive-statistics helpers shared by ensembles and sweeps.
//!
//! Quantiles use linear interpolation between order statistics (Hyndman–Fan type 7),
//! the convention of R's default and NumPy's `linear` method.

/// Summary of an ensemble of scalar outcomes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnsembleStats {
    pub median: f64,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub n: usize,
}

impl EnsembleStats {
    /// Computes the summary. Values are sorted internally, so the result does not
    /// depend on the order in which replicates finished.
    ///
    /// # Panics
    /// If `values` is empty.
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "ensemble statistics need at least one value");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            median: quantile_sorted(&sorted, 0.5),
            mean: mean(&sorted),
            q25: quantile_sorted(&sorted, 0.25),
            q75: quantile_sorted(&sorted, 0.75),
            n: sorted.len(),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

/// Arithmetic mean; summed in the given order.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Type-7 quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive (both > 0).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}
