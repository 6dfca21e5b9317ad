//! Phenomenological comparison models: linear, exponential and logistic decay on a
//! single series; exponential (shared rate) and country-linear on a panel.

use super::data::CountrySeries;
use super::fit::{FitResult, ModelKind};
use super::optimizer::{levenberg_marquardt, multi_start, Bounds, LmOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltOptions {
    /// Fixed midpoint year of the logistic-decay model.
    pub logistic_midpoint: f64,
    pub lm: LmOptions,
}

impl Default for AltOptions {
    fn default() -> Self {
        Self { logistic_midpoint: 2012.0, lm: LmOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AltData<'a> {
    Single { years: &'a [f64], scores: &'a [f64] },
    Panel(&'a [CountrySeries]),
}

/// Evaluates a fitted single-series model at `year`.
pub fn predict(kind: ModelKind, fit: &FitResult, year: f64) -> Result<f64> {
    let p = |n: &str| fit.param(n).ok_or_else(|| Error::InvalidData(format!("fit lacks parameter {n}")));
    match kind {
        ModelKind::Linear => Ok(p("a")? - p("b")? * (year - p("t_ref")?)),
        ModelKind::Exponential => Ok(p("a")? * (-p("r")? * (year - p("t_ref")?)).exp()),
        ModelKind::Logistic => Ok(p("a")? / (1.0 + (p("r")? * (year - p("t0")?)).exp())),
        other => Err(Error::InvalidData(format!("{} is not a single-series comparison model", other.name()))),
    }
}

/// Ordinary least squares of `y = c0 + c1·x`.
fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if x.len() < 2 || sxx <= 1e-12 * (1.0 + mx * mx) {
        return Err(Error::SingularDesign("need at least two distinct years"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

fn check_single(years: &[f64], scores: &[f64]) -> Result<()> {
    if years.len() != scores.len() {
        return Err(Error::InvalidData("years and scores differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::InvalidData("scores must be positive and finite".into()));
    }
    Ok(())
}

pub fn fit_linear(years: &[f64], scores: &[f64]) -> Result<FitResult> {
    check_single(years, scores)?;
    let t_ref = years[0];
    let t: Vec<f64> = years.iter().map(|y| y - t_ref).collect();
    let (a, slope) = ols(&t, scores)?;
    let fitted = t.iter().map(|t| a + slope * t).collect();
    Ok(FitResult::new(ModelKind::Linear, vec![("a", a), ("b", -slope), ("t_ref", t_ref)], 2, scores.to_vec(), fitted))
}

pub fn fit_exponential(years: &[f64], scores: &[f64], opts: &AltOptions) -> Result<FitResult> {
    check_single(years, scores)?;
    let t_ref = years[0];
    let t: Vec<f64> = years.iter().map(|y| y - t_ref).collect();
    let logs: Vec<f64> = scores.iter().map(|s| s.ln()).collect();
    let (c0, c1) = ols(&t, &logs)?;
    let residual = |p: &[f64]| t.iter().zip(scores).map(|(t, s)| p[0] * (-p[1] * t).exp() - s).collect::<Vec<_>>();
    let bounds = Bounds::new(vec![1.0, -1.0], vec![5000.0, 1.0], vec![true, false]);
    let best = levenberg_marquardt(&residual, &[c0.exp(), -c1], &bounds, &opts.lm);
    let (a, r) = (best.x[0], best.x[1]);
    let fitted = t.iter().map(|t| a * (-r * t).exp()).collect();
    let mut fit = FitResult::new(ModelKind::Exponential, vec![("a", a), ("r", r), ("t_ref", t_ref)], 2, scores.to_vec(), fitted);
    fit.converged = best.converged;
    Ok(fit)
}

pub fn fit_logistic(years: &[f64], scores: &[f64], opts: &AltOptions) -> Result<FitResult> {
    check_single(years, scores)?;
    let t0 = opts.logistic_midpoint;
    let t: Vec<f64> = years.iter().map(|y| y - t0).collect();
    ols(&t, scores)?;
    let residual = |p: &[f64]| t.iter().zip(scores).map(|(t, s)| p[0] / (1.0 + (p[1] * t).exp()) - s).collect::<Vec<_>>();
    let bounds = Bounds::new(vec![1.0, -2.0], vec![1e5, 2.0], vec![true, false]);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let starts: Vec<Vec<f64>> = [1.5, 2.0, 3.0].iter().flat_map(|m| [0.0, 0.01, 0.1].map(|r| vec![m * mean, r])).collect();
    let best = multi_start(&residual, &starts, &bounds, &opts.lm).best;
    let (a, r) = (best.x[0], best.x[1]);
    let fitted = t.iter().map(|t| a / (1.0 + (r * t).exp())).collect();
    let mut fit = FitResult::new(ModelKind::Logistic, vec![("a", a), ("r", r), ("t0", t0)], 2, scores.to_vec(), fitted);
    fit.converged = best.converged;
    Ok(fit)
}

fn panel_observed(series: &[CountrySeries]) -> Vec<f64> {
    series.iter().flat_map(|s| s.scores.iter().copied()).collect()
}

/// Per-country intercept and slope.
pub fn fit_country_linear(series: &[CountrySeries]) -> Result<FitResult> {
    if series.is_empty() {
        return Err(Error::InvalidData("panel is empty".into()));
    }
    let mut fitted = Vec::new();
    let mut params: Vec<(String, f64)> = Vec::new();
    for s in series {
        check_single(&s.years, &s.scores)?;
        let t: Vec<f64> = s.years.iter().map(|y| y - s.years[0]).collect();
        let (a, slope) = ols(&t, &s.scores)?;
        fitted.extend(t.iter().map(|t| a + slope * t));
        params.push((format!("a_{}", s.country), a));
        params.push((format!("b_{}", s.country), -slope));
    }
    let mut fit = FitResult::new(ModelKind::CountryLinear, vec![], 2 * series.len(), panel_observed(series), fitted);
    fit.parameters = params.into_iter().map(|(name, value)| super::fit::NamedValue { name, value }).collect();
    Ok(fit)
}

/// Per-country amplitude with a shared decay rate.
pub fn fit_exponential_panel(series: &[CountrySeries], opts: &AltOptions) -> Result<FitResult> {
    if series.is_empty() {
        return Err(Error::InvalidData("panel is empty".into()));
    }
    let c = series.len();
    let mut x0 = Vec::with_capacity(c + 1);
    let mut slopes = Vec::new();
    for s in series {
        check_single(&s.years, &s.scores)?;
        let t: Vec<f64> = s.years.iter().map(|y| y - s.years[0]).collect();
        let (c0, c1) = ols(&t, &s.scores.iter().map(|v| v.ln()).collect::<Vec<_>>())?;
        x0.push(c0.exp());
        slopes.push(-c1);
    }
    x0.push(slopes.iter().sum::<f64>() / c as f64);
    let residual = |p: &[f64]| {
        let mut out = Vec::new();
        for (i, s) in series.iter().enumerate() {
            out.extend(s.years.iter().zip(&s.scores).map(|(y, v)| p[i] * (-p[c] * (y - s.years[0])).exp() - v));
        }
        out
    };
    let mut lo = vec![1.0; c];
    let mut hi = vec![5000.0; c];
    lo.push(-1.0);
    hi.push(1.0);
    let bounds = Bounds::new(lo, hi, vec![false; c + 1]);
    let best = levenberg_marquardt(&residual, &x0, &bounds, &opts.lm);
    let fitted: Vec<f64> = residual(&best.x).iter().zip(panel_observed(series)).map(|(r, o)| r + o).collect();
    let mut fit = FitResult::new(ModelKind::ExponentialPanel, vec![], c + 1, panel_observed(series), fitted);
    fit.parameters = series
        .iter()
        .enumerate()
        .map(|(i, s)| super::fit::NamedValue { name: format!("a_{}", s.country), value: best.x[i] })
        .chain(std::iter::once(super::fit::NamedValue { name: "r".into(), value: best.x[c] }))
        .collect();
    fit.converged = best.converged;
    Ok(fit)
}

/// Dispatches on `kind`; single-series kinds need [`AltData::Single`], panel kinds
/// [`AltData::Panel`].
pub fn fit_alt_model(kind: ModelKind, data: &AltData<'_>, opts: &AltOptions) -> Result<FitResult> {
    match (kind, data) {
        (ModelKind::Linear, AltData::Single { years, scores }) => fit_linear(years, scores),
        (ModelKind::Exponential, AltData::Single { years, scores }) => fit_exponential(years, scores, opts),
        (ModelKind::Logistic, AltData::Single { years, scores }) => fit_logistic(years, scores, opts),
        (ModelKind::ExponentialPanel, AltData::Panel(s)) => fit_exponential_panel(s, opts),
        (ModelKind::CountryLinear, AltData::Panel(s)) => fit_country_linear(s),
        (kind, _) => Err(Error::InvalidData(format!("model {} does not apply to this data", kind.name()))),
    }
}
