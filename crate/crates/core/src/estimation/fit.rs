//! Fit summaries and information-criterion comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores are divided by this before computing information criteria.
pub const SCORE_SCALE: f64 = 500.0;

/// R² below which a fit is flagged as poor.
pub const POOR_FIT_R2: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ode,
    OdePanel,
    Linear,
    Exponential,
    Logistic,
    ExponentialPanel,
    CountryLinear,
}

impl ModelKind {
    /// Declared number of free parameters; panel kinds assume 15 countries.
    pub fn declared_params(self) -> usize {
        match self {
            ModelKind::Ode | ModelKind::Linear | ModelKind::Exponential | ModelKind::Logistic => 2,
            ModelKind::OdePanel => 3,
            ModelKind::ExponentialPanel => 16,
            ModelKind::CountryLinear => 30,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ode => "ode",
            ModelKind::OdePanel => "ode-panel",
            ModelKind::Linear => "linear",
            ModelKind::Exponential => "exponential",
            ModelKind::Logistic => "logistic",
            ModelKind::ExponentialPanel => "exponential-panel",
            ModelKind::CountryLinear => "country-linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model_kind: ModelKind,
    /// Free parameters followed by any fixed ones (see `n_params`).
    pub parameters: Vec<NamedValue>,
    pub n_params: usize,
    pub r_squared: f64,
    /// In score units.
    pub rmse: f64,
    pub aic: f64,
    pub bic: f64,
    /// `fitted − observed`, in score units.
    pub residuals: Vec<f64>,
    pub observed: Vec<f64>,
    pub fitted: Vec<f64>,
    pub converged: bool,
    /// Names of parameters sitting on a bound.
    pub pinned: Vec<String>,
    pub poor_fit: bool,
}

impl FitResult {
    pub(crate) fn new(
        model_kind: ModelKind,
        parameters: Vec<(&str, f64)>,
        n_params: usize,
        observed: Vec<f64>,
        fitted: Vec<f64>,
    ) -> Self {
        let residuals: Vec<f64> = fitted.iter().zip(&observed).map(|(f, o)| f - o).collect();
        let n = observed.len() as f64;
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        let mean = observed.iter().sum::<f64>() / n;
        let tss: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
        let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
        let (aic, bic) = information_criteria(&residuals, n_params);
        Self {
            model_kind,
            parameters: parameters.into_iter().map(|(name, value)| NamedValue { name: name.into(), value }).collect(),
            n_params,
            r_squared,
            rmse: (rss / n).sqrt(),
            aic,
            bic,
            residuals,
            observed,
            fitted,
            converged: true,
            pinned: Vec::new(),
            poor_fit: r_squared < POOR_FIT_R2,
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }
}

/// `(AIC, BIC)` from residuals in score units, normalised by [`SCORE_SCALE`].
pub fn information_criteria(residuals: &[f64], k: usize) -> (f64, f64) {
    let n = residuals.len() as f64;
    let rss: f64 = residuals.iter().map(|r| (r / SCORE_SCALE).powi(2)).sum();
    let base = n * (rss / n).max(f64::MIN_POSITIVE).ln();
    (base + 2.0 * k as f64, base + k as f64 * n.ln())
}

/// Maximised Gaussian log-likelihood for `n` residuals with sum of squares `rss`.
pub fn gaussian_loglik(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI * rss.max(f64::MIN_POSITIVE) / n).ln() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model_kind: ModelKind,
    pub n_params: usize,
    pub r_squared: f64,
    pub aic: f64,
    pub bic: f64,
    pub delta_aic: f64,
    pub delta_bic: f64,
}

/// Fits ranked by `criterion` (best first) with differences to the best AIC and BIC.
pub fn compare_models(fits: &[FitResult], criterion: Criterion) -> Result<Vec<ComparisonRow>> {
    let first = fits.first().ok_or_else(|| Error::MismatchedObservations("no fits to compare".into()))?;
    for f in fits {
        if f.observed != first.observed {
            return Err(Error::MismatchedObservations(format!(
                "{} and {} were fitted to different observations",
                first.model_kind.name(),
                f.model_kind.name()
            )));
        }
    }
    let best_aic = fits.iter().map(|f| f.aic).fold(f64::INFINITY, f64::min);
    let best_bic = fits.iter().map(|f| f.bic).fold(f64::INFINITY, f64::min);
    let mut rows: Vec<ComparisonRow> = fits
        .iter()
        .map(|f| ComparisonRow {
            model_kind: f.model_kind,
            n_params: f.n_params,
            r_squared: f.r_squared,
            aic: f.aic,
            bic: f.bic,
            delta_aic: f.aic - best_aic,
            delta_bic: f.bic - best_bic,
        })
        .collect();
    let key = |r: &ComparisonRow| match criterion {
        Criterion::Aic => r.aic,
        Criterion::Bic => r.bic,
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit(kind: ModelKind, observed: &[f64], fitted: &[f64], k: usize) -> FitResult {
        FitResult::new(kind, vec![], k, observed.to_vec(), fitted.to_vec())
    }

    #[test]
    fn constant_series_has_zero_r2() {
        let f = fit(ModelKind::Linear, &[480.0; 5], &[480.0; 5], 2);
        assert_eq!(f.r_squared, 0.0);
        assert!(f.aic.is_finite());
    }

    #[test]
    fn identical_fits_have_zero_deltas() {
        let obs = [500.0, 490.0, 480.0];
        let a = fit(ModelKind::Linear, &obs, &[499.0, 491.0, 480.5], 2);
        let mut b = a.clone();
        b.model_kind = ModelKind::Exponential;
        let rows = compare_models(&[a, b], Criterion::Aic).unwrap();
        assert!(rows.iter().all(|r| r.delta_aic == 0.0 && r.delta_bic == 0.0));
    }

    #[test]
    fn mismatched_observations_rejected() {
        let a = fit(ModelKind::Linear, &[1.0, 2.0], &[1.0, 2.0], 2);
        let b = fit(ModelKind::Ode, &[1.0, 3.0], &[1.0, 2.0], 2);
        assert!(matches!(compare_models(&[a, b], Criterion::Bic), Err(Error::MismatchedObservations(_))));
    }

    #[test]
    fn hand_computed_criteria() {
        // RSS on the normalised scale: 2 · (5/500)² = 2e-4, n = 2.
        let (aic, bic) = information_criteria(&[5.0, -5.0], 1);
        let base = 2.0 * (1e-4f64).ln();
        assert!((aic - (base + 2.0)).abs() < 1e-12);
        assert!((bic - (base + 2f64.ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lower_rss_wins_at_equal_k(r in proptest::collection::vec(-10.0..10.0f64, 3..12), scale in 0.1..0.99f64) {
            prop_assume!(r.iter().any(|v| v.abs() > 1e-6));
            let smaller: Vec<f64> = r.iter().map(|v| v * scale).collect();
            let (a1, b1) = information_criteria(&r, 2);
            let (a2, b2) = information_criteria(&smaller, 2);
            prop_assert!(a2 < a1 && b2 < b1);
        }
    }
}
