//! Driven capability ODE fitted to test-score series.
//!
//! Scores are modelled as `score = h_max · H(t)` with
//! `dH/dt = α(H+ε)(1−H)(1−a(t)) − βH·a(t)`, where `a(t)` is an exogenous adoption
//! driver and each series starts from its first observed score.

use rayon::prelude::*;
use serde::Serialize;

use super::data::{CountrySeries, Driver};
use super::fit::{gaussian_loglik, FitResult, ModelKind};
use super::optimizer::{latin_hypercube, multi_start, Bounds, LmOptions};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::stats::logspace;

pub const ALPHA_BOUNDS: (f64, f64) = (1e-5, 1.0);
pub const BETA_BOUNDS: (f64, f64) = (1e-5, 1.0);
pub const H_MAX_BOUNDS: (f64, f64) = (500.0, 1200.0);
/// Fixed score ceiling used by the single-series fit.
pub const DEFAULT_H_MAX: f64 = 787.0;
/// Deviance threshold of a 95% profile-likelihood interval (χ²₁).
pub const CHI2_95: f64 = 3.84;

/// RK4 integration of the driven equation, reporting `H` at each of `times`
/// (non-decreasing, all `≥ t0`). Steps are shortened to land exactly on each time.
#[allow(clippy::too_many_arguments)]
pub fn integrate_driven(
    alpha: f64,
    beta: f64,
    epsilon: f64,
    h0: f64,
    t0: f64,
    times: &[f64],
    driver: &Driver,
    dt: f64,
) -> Vec<f64> {
    let f = |t: f64, h: f64| {
        let a = driver.at(t);
        alpha * (h + epsilon) * (1.0 - h) * (1.0 - a) - beta * h * a
    };
    let mut h = h0;
    let mut t = t0;
    times
        .iter()
        .map(|&target| {
            while t < target - 1e-9 {
                let s = dt.min(target - t);
                let k1 = f(t, h);
                let k2 = f(t + s / 2.0, h + s / 2.0 * k1);
                let k3 = f(t + s / 2.0, h + s / 2.0 * k2);
                let k4 = f(t + s, h + s * k3);
                h = (h + s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
                t += s;
            }
            h
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeFitOptions {
    pub starts: usize,
    pub seed: u64,
    pub dt: f64,
    pub epsilon: f64,
    /// Fixed score ceiling; `None` estimates it (panel fits only).
    pub h_max: Option<f64>,
    pub lm: LmOptions,
}

impl OdeFitOptions {
    pub fn single() -> Self {
        Self { starts: 16, seed: 42, dt: 0.1, epsilon: 0.01, h_max: Some(DEFAULT_H_MAX), lm: LmOptions::default() }
    }

    pub fn panel() -> Self {
        Self { h_max: None, ..Self::single() }
    }
}

struct Problem<'a> {
    series: &'a [CountrySeries],
    opts: &'a OdeFitOptions,
}

impl Problem<'_> {
    fn observed(&self) -> Vec<f64> {
        self.series.iter().flat_map(|s| s.scores.iter().copied()).collect()
    }

    fn predict(&self, alpha: f64, beta: f64, h_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.series {
            let h0 = (s.scores[0] / h_max).clamp(0.0, 1.0);
            let h = integrate_driven(alpha, beta, self.opts.epsilon, h0, s.years[0], &s.years, &s.driver, self.opts.dt);
            out.extend(h.into_iter().map(|h| h * h_max));
        }
        out
    }

    /// Parameter vector layout: `[α, β]` with fixed `h_max`, else `[α, β, h_max]`.
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64) {
        (x[0], x[1], self.opts.h_max.unwrap_or_else(|| x[2]))
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let (a, b, hm) = self.unpack(x);
        self.predict(a, b, hm).iter().zip(self.series.iter().flat_map(|s| &s.scores)).map(|(p, o)| p - o).collect()
    }

    fn bounds(&self) -> Bounds {
        let mut lo = vec![ALPHA_BOUNDS.0, BETA_BOUNDS.0];
        let mut hi = vec![ALPHA_BOUNDS.1, BETA_BOUNDS.1];
        let mut log = vec![true, true];
        if self.opts.h_max.is_none() {
            lo.push(H_MAX_BOUNDS.0);
            hi.push(H_MAX_BOUNDS.1);
            log.push(false);
        }
        Bounds::new(lo, hi, log)
    }

    fn fit(&self, kind: ModelKind) -> FitResult {
        let bounds = self.bounds();
        let starts = latin_hypercube(&bounds, self.opts.starts, self.opts.seed);
        let res = multi_start(&|x: &[f64]| self.residual(x), &starts, &bounds, &self.opts.lm);
        let (a, b, hm) = self.unpack(&res.best.x);
        let names = ["alpha", "beta", "h_max"];
        let n_free = bounds.dim();
        let mut out = FitResult::new(
            kind,
            vec![("alpha", a), ("beta", b), ("h_max", hm)],
            n_free,
            self.observed(),
            self.predict(a, b, hm),
        );
        out.converged = res.converged_starts > 0;
        out.pinned = bounds.pinned(&res.best.x).into_iter().map(|i| names[i].to_string()).collect();
        out
    }
}

fn check_series(s: &CountrySeries, min_obs: usize) -> Result<()> {
    if s.years.len() != s.scores.len() || s.years.len() < min_obs {
        return Err(Error::InvalidData(format!("series {} needs at least {min_obs} observations", s.country)));
    }
    if s.years.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidData(format!("series {} years must be strictly increasing", s.country)));
    }
    Ok(())
}

/// Two-parameter (α, β) fit of one series with fixed `h_max`.
pub fn fit_ode_single(years: &[f64], scores: &[f64], driver: &Driver, opts: &OdeFitOptions) -> Result<FitResult> {
    let Some(h_max) = opts.h_max else {
        return Err(Error::InvalidData("single-series fit needs a fixed h_max".into()));
    };
    crate::error::check_range("h_max", h_max, H_MAX_BOUNDS.0, H_MAX_BOUNDS.1, "[500, 1200]")?;
    let series = [CountrySeries { country: "series".into(), years: years.to_vec(), scores: scores.to_vec(), driver: driver.clone() }];
    check_series(&series[0], 4)?;
    Ok(Problem { series: &series, opts }.fit(ModelKind::Ode))
}

/// Shared (α, β, h_max) fit across countries, or (α, β) when `opts.h_max` is fixed.
pub fn fit_ode_panel(series: &[CountrySeries], opts: &OdeFitOptions) -> Result<FitResult> {
    if series.len() < 2 && opts.h_max.is_none() {
        return Err(Error::InvalidData("panel fit needs at least two countries".into()));
    }
    if series.is_empty() {
        return Err(Error::InvalidData("panel is empty".into()));
    }
    for s in series {
        check_series(s, 2)?;
    }
    let kind = if opts.h_max.is_some() { ModelKind::Ode } else { ModelKind::OdePanel };
    Ok(Problem { series, opts }.fit(kind))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileTarget<'a> {
    Single { years: &'a [f64], scores: &'a [f64], driver: &'a Driver },
    Panel(&'a [CountrySeries]),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub loglik: f64,
    pub beta: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileLikelihood {
    pub points: Vec<ProfilePoint>,
    pub mle_alpha: f64,
    pub loglik_max: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// The interval reaches the lower end of the grid (the true bound may lie beyond).
    pub lower_open: bool,
    pub upper_open: bool,
}

impl ProfileLikelihood {
    pub fn ci_decades(&self) -> f64 {
        (self.ci_hi / self.ci_lo).log10()
    }

    pub fn contains(&self, alpha: f64) -> bool {
        (self.ci_lo..=self.ci_hi).contains(&alpha)
    }
}

/// Default profile grid: 25 log-spaced values over `[1e-4, 0.1]`.
pub fn default_alpha_grid() -> Vec<f64> {
    logspace(1e-4, 0.1, 25)
}

/// Profile log-likelihood of α: at each grid value the remaining parameters are
/// re-optimised (multi-start, including the full-fit optimum as a start).
pub fn profile_likelihood_alpha(target: &ProfileTarget<'_>, alpha_grid: &[f64], opts: &OdeFitOptions) -> Result<ProfileLikelihood> {
    if alpha_grid.len() < 2 || alpha_grid.windows(2).any(|w| w[1] <= w[0]) || alpha_grid[0] <= 0.0 {
        return Err(Error::InvalidSweep("alpha grid must be positive and strictly increasing".into()));
    }
    let single;
    let (series, opts): (&[CountrySeries], OdeFitOptions) = match target {
        ProfileTarget::Single { years, scores, driver } => {
            single = [CountrySeries {
                country: "series".into(),
                years: years.to_vec(),
                scores: scores.to_vec(),
                driver: (*driver).clone(),
            }];
            check_series(&single[0], 4)?;
            (&single, OdeFitOptions { h_max: opts.h_max.or(Some(DEFAULT_H_MAX)), ..opts.clone() })
        }
        ProfileTarget::Panel(s) => (s, opts.clone()),
    };
    let full = if series.len() == 1 { fit_ode_single(&series[0].years, &series[0].scores, &series[0].driver, &opts)? } else { fit_ode_panel(series, &opts)? };
    let problem = Problem { series, opts: &opts };
    let n = full.n_obs();
    let full_ll = gaussian_loglik(full.rss(), n);
    let full_alpha = full.param("alpha").expect("alpha");
    let full_rest: Vec<f64> = full.parameters[1..full.n_params].iter().map(|p| p.value).collect();

    // Bounds for the nuisance parameters only.
    let all = problem.bounds();
    let rest_bounds = Bounds::new(all.lo[1..].to_vec(), all.hi[1..].to_vec(), all.log_scale[1..].to_vec());
    let points: Vec<ProfilePoint> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let mut starts = latin_hypercube(&rest_bounds, opts.starts.max(2) / 2, opts.seed);
            starts.push(full_rest.clone());
            let residual = |x: &[f64]| {
                let mut full_x = vec![alpha];
                full_x.extend_from_slice(x);
                problem.residual(&full_x)
            };
            let best = multi_start(&residual, &starts, &rest_bounds, &opts.lm).best;
            let mut full_x = vec![alpha];
            full_x.extend_from_slice(&best.x);
            let (_, beta, h_max) = problem.unpack(&full_x);
            ProfilePoint { alpha, loglik: gaussian_loglik(best.rss, n), beta, h_max }
        })
        .collect();

    let (mle_alpha, loglik_max) = points
        .iter()
        .map(|p| (p.alpha, p.loglik))
        .fold((full_alpha, full_ll), |acc, p| if p.1 > acc.1 { p } else { acc });

    // Curve used for the interval: grid points plus the MLE when it lies inside the grid.
    let mut curve: Vec<(f64, f64)> = points.iter().map(|p| (p.alpha, p.loglik)).collect();
    if mle_alpha > alpha_grid[0] && mle_alpha < alpha_grid[alpha_grid.len() - 1] && !alpha_grid.contains(&mle_alpha) {
        let at = curve.partition_point(|p| p.0 < mle_alpha);
        curve.insert(at, (mle_alpha, loglik_max));
    }
    let dev = |i: usize| 2.0 * (loglik_max - curve[i].1);
    let anchor = (0..curve.len()).max_by(|&a, &b| curve[a].1.total_cmp(&curve[b].1)).expect("non-empty");
    let crossing = |inside: usize, outside: usize| {
        let (la, lb) = (curve[inside].0.ln(), curve[outside].0.ln());
        let (da, db) = (dev(inside), dev(outside));
        let w = if db > da { ((CHI2_95 - da) / (db - da)).clamp(0.0, 1.0) } else { 0.0 };
        (la + w * (lb - la)).exp()
    };
    let mut lo = anchor;
    while lo > 0 && dev(lo - 1) <= CHI2_95 {
        lo -= 1;
    }
    let mut hi = anchor;
    while hi + 1 < curve.len() && dev(hi + 1) <= CHI2_95 {
        hi += 1;
    }
    let lower_open = lo == 0;
    let upper_open = hi == curve.len() - 1;
    let ci_lo = if lower_open { curve[0].0 } else { crossing(lo, lo - 1) };
    let ci_hi = if upper_open { curve[hi].0 } else { crossing(hi, hi + 1) };
    Ok(ProfileLikelihood { points, mle_alpha, loglik_max, ci_lo, ci_hi, lower_open, upper_open })
}

/// Scores generated by the model from `initial_score`, with Gaussian noise.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_scores(
    alpha: f64,
    beta: f64,
    h_max: f64,
    initial_score: f64,
    years: &[f64],
    driver: &Driver,
    noise_sd: f64,
    seed: u64,
) -> Vec<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    let opts = OdeFitOptions::single();
    integrate_driven(alpha, beta, opts.epsilon, initial_score / h_max, years[0], years, driver, opts.dt)
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            let noise = noise_sd * rng.normal();
            if i == 0 { initial_score } else { h * h_max + noise }
        })
        .collect()
}

/// Replaces each template country's scores with model output from its first score.
pub fn synthetic_panel(alpha: f64, beta: f64, h_max: f64, template: &[CountrySeries], noise_sd: f64, seed: u64) -> Vec<CountrySeries> {
    template
        .iter()
        .enumerate()
        .map(|(i, s)| CountrySeries {
            scores: synthetic_scores(alpha, beta, h_max, s.scores[0], &s.years, &s.driver, noise_sd, crate::rng::mix_seed(seed, i as u64)),
            ..s.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const YEARS: [f64; 7] = [2003.0, 2006.0, 2009.0, 2012.0, 2015.0, 2018.0, 2022.0];

    #[test]
    fn undriven_logistic_matches_closed_form() {
        // With a = 0 and ε = 0: H(t) = 1 / (1 + (1/H0 − 1) e^{−αt}).
        let h = integrate_driven(0.3, 0.1, 0.0, 0.2, 0.0, &[0.0, 5.0, 10.0], &Driver::Constant(0.0), 0.1);
        for (t, v) in [0.0, 5.0, 10.0].iter().zip(h) {
            let exact = 1.0 / (1.0 + 4.0 * (-0.3f64 * t).exp());
            assert!((v - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn full_delegation_is_pure_decay() {
        let h = integrate_driven(0.3, 0.05, 0.01, 0.8, 0.0, &[7.5], &Driver::Constant(1.0), 0.1);
        assert!((h[0] - 0.8 * (-0.05f64 * 7.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn no_forcing_gives_non_decreasing_poor_fit() {
        let scores = [500.0, 498.0, 496.0, 494.0, 490.0, 489.0, 472.0];
        let fit = fit_ode_single(&YEARS, &scores, &Driver::Constant(0.0), &OdeFitOptions::single()).unwrap();
        assert!(fit.fitted.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(fit.poor_fit);
    }

    #[test]
    fn synthetic_single_recovers_beta() {
        let driver = Driver::default_average();
        let scores = synthetic_scores(0.02, 0.01, DEFAULT_H_MAX, 500.0, &YEARS, &driver, 0.0, 1);
        let fit = fit_ode_single(&YEARS, &scores, &driver, &OdeFitOptions::single()).unwrap();
        let beta = fit.param("beta").unwrap();
        assert!((beta / 0.01 - 1.0).abs() < 0.1, "beta {beta}");
        assert!(fit.rmse < 0.1);
    }

    #[test]
    fn fits_are_deterministic() {
        let driver = Driver::default_average();
        let scores = synthetic_scores(0.02, 0.01, DEFAULT_H_MAX, 500.0, &YEARS, &driver, 1.0, 3);
        let a = fit_ode_single(&YEARS, &scores, &driver, &OdeFitOptions::single()).unwrap();
        let b = fit_ode_single(&YEARS, &scores, &driver, &OdeFitOptions::single()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_observations_rejected() {
        let d = Driver::Constant(0.5);
        assert!(fit_ode_single(&YEARS[..3], &[500.0, 490.0, 480.0], &d, &OdeFitOptions::single()).is_err());
    }
}
