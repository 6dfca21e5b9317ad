//! Experiment registry: every preset and subcommand builds a list of plot-ready
//! tables, which [`run_experiment`] writes alongside a manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use capdyn_core::abm;
use capdyn_core::estimation::alt::{fit_exponential, fit_linear, fit_logistic};
use capdyn_core::estimation::fit::{compare_models, Criterion};
use capdyn_core::estimation::pisa::default_alpha_grid;
use capdyn_core::estimation::{
    beta_eff, fit_alt_model, fit_ode_panel, fit_ode_single, kbar_table, predict_decline_curve, profile_likelihood_alpha,
    recovery_comparison, AltData, AltOptions, CountrySeries, Driver, FitResult, ModelKind, OdeFitOptions, PanelDataset,
    ProfileLikelihood, ProfileTarget,
};
use capdyn_core::ode::{integrate, simulate_two_skill, Scenario, TwoSkillConfig, DEFAULT_DT};
use capdyn_core::stats::linspace;
use capdyn_core::sweep::{
    antifragility_curve, default_k_grid, epsilon_sweep, gamma_delta_grid, initial_condition_grid, k_crisis_heatmap, k_sweep,
    policy_curve, sensitivity_suite, Axis, Executor, KSweep, LandscapeOptions, SensitivityParam, Statistic, SweepParam, SweepSpec,
};
use capdyn_core::{ModelParams, SystemState};

use crate::config::RunConfig;
use crate::emit::{emit_results, ensure_writable, ResultManifest, Table};
use crate::ingest::{read_adoption, read_benchmarks, read_deskill, read_pisa, DataKind};

/// Crisis probabilities of the antifragility curve.
pub const CRISIS_LEVELS: [f64; 5] = [0.0, 0.05, 0.12, 0.20, 0.25];
/// Capability values of the antifragility curve.
pub const ANTIFRAGILITY_K: [f64; 4] = [0.7, 0.8, 0.9, 0.95];
/// Mandatory-practice fractions of the policy curve.
pub const PRACTICE_FRACTIONS: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
/// ε values of the recovery-time sweep.
pub const EPSILON_GRID: [f64; 7] = [0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.25];
/// Parameter values per sensitivity-suite parameter.
pub const SENSITIVITY_VALUES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig1Calibration,
    Fig2PisaPanel,
    Fig3ModelComparison,
    Fig4Threshold,
    Fig4bHeatmap,
    Fig5Antifragility,
    Fig6Policy,
    Tab1Kbar,
    SiS1ParameterSpace,
    SiS2Epsilon,
    SiS4TwoSkill,
    SensitivitySuite,
}

impl Preset {
    pub const ALL: [Preset; 12] = [
        Preset::Fig1Calibration,
        Preset::Fig2PisaPanel,
        Preset::Fig3ModelComparison,
        Preset::Fig4Threshold,
        Preset::Fig4bHeatmap,
        Preset::Fig5Antifragility,
        Preset::Fig6Policy,
        Preset::Tab1Kbar,
        Preset::SiS1ParameterSpace,
        Preset::SiS2Epsilon,
        Preset::SiS4TwoSkill,
        Preset::SensitivitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1Calibration => "fig1-calibration",
            Preset::Fig2PisaPanel => "fig2-pisa-panel",
            Preset::Fig3ModelComparison => "fig3-model-comparison",
            Preset::Fig4Threshold => "fig4-threshold",
            Preset::Fig4bHeatmap => "fig4b-heatmap",
            Preset::Fig5Antifragility => "fig5-antifragility",
            Preset::Fig6Policy => "fig6-policy",
            Preset::Tab1Kbar => "tab1-kbar",
            Preset::SiS1ParameterSpace => "si-s1-parameter-space",
            Preset::SiS2Epsilon => "si-s2-epsilon",
            Preset::SiS4TwoSkill => "si-s4-twoskill",
            Preset::SensitivitySuite => "sensitivity-suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::Fig1Calibration => "decay rates from deskilling studies and predicted decline curves",
            Preset::Fig2PisaPanel => "single-series and panel ODE fits with profile likelihoods",
            Preset::Fig3ModelComparison => "AIC/BIC model comparison and post-removal recovery predictions",
            Preset::Fig4Threshold => "equilibrium capability versus K and the critical threshold K*",
            Preset::Fig4bHeatmap => "K x crisis-frequency heatmap with the H = 0.5 contour",
            Preset::Fig5Antifragility => "equilibrium capability versus crisis frequency",
            Preset::Fig6Policy => "equilibrium capability versus mandatory-practice fraction",
            Preset::Tab1Kbar => "benchmark capability ratios and their mean",
            Preset::SiS1ParameterSpace => "adoption x social-pressure grid, historical regimes, bistability grid",
            Preset::SiS2Epsilon => "recovery time versus the relearning floor",
            Preset::SiS4TwoSkill => "two-skill reallocation scenarios",
            Preset::SensitivitySuite => "K* under one-at-a-time parameter variation",
        }
    }

    /// Configuration layered under the user's file and flags.
    pub fn config_overrides(self) -> Vec<String> {
        let mut o = vec![format!("experiment=\"{}\"", self.name())];
        match self {
            Preset::Fig4bHeatmap => o.push("replicates=10".into()),
            Preset::Fig5Antifragility => o.push("abm.turnover_rate=0.02".into()),
            _ => {}
        }
        o
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|p| p.name()).collect()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset `{0}`; valid presets: {valid}", valid = Preset::names().join(", "))]
pub struct UnknownPreset(pub String);

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| UnknownPreset(s.into()))
    }
}

/// What `simulate` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimulateMode {
    Ode,
    Abm,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Preset(Preset),
    Simulate { mode: SimulateMode, t_end: f64 },
    Sweep { axes: Vec<Axis>, statistic: Statistic },
    Fit { profile: bool },
    Compare,
    Calibrate,
    Benchmark,
    TwoSkill,
}

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Experiment::Preset(p) => p.name(),
            Experiment::Simulate { .. } => "simulate",
            Experiment::Sweep { .. } => "sweep",
            Experiment::Fit { .. } => "fit",
            Experiment::Compare => "compare",
            Experiment::Calibrate => "calibrate",
            Experiment::Benchmark => "benchmark",
            Experiment::TwoSkill => "two-skill",
        }
    }
}

/// Parses `param:lo:hi:n`, e.g. `k_ai:0.5:0.99:50`.
pub fn parse_axis(s: &str) -> Result<Axis, String> {
    const PARAMS: [SweepParam; 10] = [
        SweepParam::KAi,
        SweepParam::PCrisis,
        SweepParam::PracticeFraction,
        SweepParam::TurnoverRate,
        SweepParam::Alpha,
        SweepParam::Beta,
        SweepParam::Gamma,
        SweepParam::Delta,
        SweepParam::Epsilon,
        SweepParam::Scope,
    ];
    let parts: Vec<&str> = s.split(':').collect();
    let [name, lo, hi, n] = parts[..] else {
        return Err(format!("axis `{s}` is not of the form param:lo:hi:n"));
    };
    let param = PARAMS.into_iter().find(|p| p.name() == name).ok_or_else(|| {
        format!("unknown sweep parameter `{name}`; valid: {}", PARAMS.map(SweepParam::name).join(", "))
    })?;
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("axis `{s}`: {e}"));
    let n = n.parse::<usize>().map_err(|e| format!("axis `{s}`: {e}"))?;
    Ok(Axis { param, lo: num(lo)?, hi: num(hi)?, n })
}

/// A failure tagged with the stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source:#}")]
pub struct RunError {
    pub stage: &'static str,
    #[source]
    pub source: anyhow::Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, RunError> {
        self.map_err(|e| RunError { stage, source: e.into() })
    }
}

/// Output directory of `experiment` under `cfg.output_dir`.
pub fn output_dir(cfg: &RunConfig, experiment: &Experiment) -> PathBuf {
    cfg.output_dir.join(experiment.name())
}

/// Checks the output directory, builds every table and writes them with the manifest.
pub fn run_experiment(cfg: &RunConfig, experiment: &Experiment) -> Result<ResultManifest, RunError> {
    let started = Instant::now();
    let dir = output_dir(cfg, experiment);
    ensure_writable(&dir).stage("output")?;
    let exec = Executor::new(cfg.thread_count()).stage("setup")?;
    let tables = match build_tables(cfg, experiment, &exec) {
        Ok(t) => t,
        Err(e) => {
            // Only succeeds if nothing was written.
            let _ = std::fs::remove_dir(&dir);
            return Err(e);
        }
    };
    let manifest = ResultManifest {
        experiment: experiment.name().to_string(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        threads: exec.threads(),
        format: cfg.format,
        wall_time: started.elapsed().as_secs_f64(),
        files: Vec::new(),
    };
    emit_results(&dir, &tables, cfg.format, manifest).stage("emit")
}

/// Computes the tables of `experiment` on `exec`'s worker pool.
pub fn build_tables(cfg: &RunConfig, experiment: &Experiment, exec: &Executor) -> Result<Vec<Table>, RunError> {
    exec.install(|| match experiment {
        Experiment::Preset(p) => build_preset(cfg, *p, exec),
        Experiment::Simulate { mode, t_end } => simulate(cfg, *mode, *t_end),
        Experiment::Sweep { axes, statistic } => sweep(cfg, axes, *statistic, exec),
        Experiment::Fit { profile } => fits(cfg, *profile),
        Experiment::Compare => comparison(cfg),
        Experiment::Calibrate => calibration(cfg),
        Experiment::Benchmark => benchmarks(cfg),
        Experiment::TwoSkill => two_skill(),
    })
}

fn build_preset(cfg: &RunConfig, preset: Preset, exec: &Executor) -> Result<Vec<Table>, RunError> {
    match preset {
        Preset::Fig1Calibration => calibration(cfg),
        Preset::Fig2PisaPanel => fits(cfg, true),
        Preset::Fig3ModelComparison => comparison(cfg),
        Preset::Fig4Threshold => threshold(cfg, exec),
        Preset::Fig4bHeatmap => heatmap(cfg, exec),
        Preset::Fig5Antifragility => antifragility(cfg, exec),
        Preset::Fig6Policy => policy(cfg, exec),
        Preset::Tab1Kbar => benchmarks(cfg),
        Preset::SiS1ParameterSpace => parameter_space(cfg, exec),
        Preset::SiS2Epsilon => epsilon(),
        Preset::SiS4TwoSkill => two_skill(),
        Preset::SensitivitySuite => sensitivity(cfg, exec),
    }
}

fn data_path(cfg: &RunConfig, kind: DataKind) -> PathBuf {
    cfg.data_dir.join(kind.file_name())
}

fn load_panel(cfg: &RunConfig) -> Result<PanelDataset, RunError> {
    let observations = read_pisa(&data_path(cfg, DataKind::Pisa)).stage("ingest")?;
    let drivers = read_adoption(&data_path(cfg, DataKind::Adoption)).stage("ingest")?;
    let panel = PanelDataset { observations, drivers };
    panel.validate().stage("ingest")?;
    Ok(panel)
}

/// The bundled score data as fitting inputs.
struct Scores {
    years: Vec<f64>,
    scores: Vec<f64>,
    driver: Driver,
    series: Vec<CountrySeries>,
}

fn load_scores(cfg: &RunConfig) -> Result<Scores, RunError> {
    let panel = load_panel(cfg)?;
    let (years, scores) = panel
        .average_series()
        .ok_or_else(|| anyhow::anyhow!("{} has no cross-country average rows", data_path(cfg, DataKind::Pisa).display()))
        .stage("ingest")?;
    let series = panel.series().stage("ingest")?;
    Ok(Scores { years, scores, driver: Driver::default_average(), series })
}

fn single_options(cfg: &RunConfig) -> OdeFitOptions {
    OdeFitOptions { starts: cfg.fit.starts, seed: cfg.seed, h_max: Some(cfg.fit.h_max), ..OdeFitOptions::single() }
}

fn panel_options(cfg: &RunConfig) -> OdeFitOptions {
    OdeFitOptions { starts: cfg.fit.starts, seed: cfg.seed, ..OdeFitOptions::panel() }
}

fn alt_options(cfg: &RunConfig) -> AltOptions {
    AltOptions { logistic_midpoint: cfg.fit.logistic_midpoint, ..AltOptions::default() }
}

fn calibration(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let rows = read_deskill(&data_path(cfg, DataKind::Deskill)).stage("ingest")?;
    let mut cal = Table::new("calibration", &["domain", "decline", "duration", "time_unit", "beta_eff"]);
    let mut curves = Table::new("decline_curves", &["domain", "t", "h"]);
    for obs in &rows {
        let beta = beta_eff(obs).stage("compute")?;
        cal.push(vec![obs.domain.as_str().into(), obs.decline.into(), obs.duration.into(), obs.time_unit.as_str().into(), beta.into()]);
        let grid = linspace(0.0, 1.5 * obs.duration, 31);
        let h = predict_decline_curve(beta, 1.0, 1.0, &grid).stage("compute")?;
        for (t, h) in grid.iter().zip(h) {
            curves.push(vec![obs.domain.as_str().into(), (*t).into(), h.into()]);
        }
    }
    Ok(vec![cal, curves])
}

fn fit_row(t: &mut Table, label: &str, f: &FitResult) {
    let p = |n: &str| f.param(n).unwrap_or(f64::NAN);
    t.push(vec![
        label.into(),
        f.n_obs().into(),
        f.n_params.into(),
        p("alpha").into(),
        p("beta").into(),
        p("h_max").into(),
        f.r_squared.into(),
        f.rmse.into(),
        f.aic.into(),
        f.bic.into(),
        f.converged.into(),
        f.pinned.join(";").into(),
        f.poor_fit.into(),
    ]);
}

fn profile_rows(points: &mut Table, ci: &mut Table, label: &str, p: &ProfileLikelihood) {
    for pt in &p.points {
        let deviance = 2.0 * (p.loglik_max - pt.loglik);
        points.push(vec![
            label.into(),
            pt.alpha.into(),
            pt.loglik.into(),
            deviance.into(),
            pt.beta.into(),
            pt.h_max.into(),
            p.contains(pt.alpha).into(),
        ]);
    }
    ci.push(vec![
        label.into(),
        p.mle_alpha.into(),
        p.loglik_max.into(),
        p.ci_lo.into(),
        p.ci_hi.into(),
        p.ci_decades().into(),
        p.lower_open.into(),
        p.upper_open.into(),
    ]);
}

fn fits(cfg: &RunConfig, profile: bool) -> Result<Vec<Table>, RunError> {
    let d = load_scores(cfg)?;
    let single = fit_ode_single(&d.years, &d.scores, &d.driver, &single_options(cfg)).stage("compute")?;
    let panel = fit_ode_panel(&d.series, &panel_options(cfg)).stage("compute")?;

    let mut summary = Table::new(
        "fit_summary",
        &["model", "n_obs", "n_params", "alpha", "beta", "h_max", "r_squared", "rmse", "aic", "bic", "converged", "pinned", "poor_fit"],
    );
    fit_row(&mut summary, "ode-single", &single);
    fit_row(&mut summary, "ode-panel", &panel);

    let mut traj = Table::new("trajectories", &["fit", "country", "year", "observed", "fitted"]);
    for (y, (o, f)) in d.years.iter().zip(single.observed.iter().zip(&single.fitted)) {
        traj.push(vec!["ode-single".into(), capdyn_core::estimation::data::AVERAGE_LABEL.into(), (*y as i64).into(), (*o).into(), (*f).into()]);
    }
    let mut i = 0;
    for s in &d.series {
        for y in &s.years {
            traj.push(vec!["ode-panel".into(), s.country.as_str().into(), (*y as i64).into(), panel.observed[i].into(), panel.fitted[i].into()]);
            i += 1;
        }
    }
    let mut tables = vec![summary, traj];

    if profile {
        let grid = default_alpha_grid();
        let target = ProfileTarget::Single { years: &d.years, scores: &d.scores, driver: &d.driver };
        let ps = profile_likelihood_alpha(&target, &grid, &single_options(cfg)).stage("compute")?;
        let pp = profile_likelihood_alpha(&ProfileTarget::Panel(&d.series), &grid, &panel_options(cfg)).stage("compute")?;
        let mut points = Table::new("profile_alpha", &["fit", "alpha", "loglik", "deviance", "beta", "h_max", "in_ci"]);
        let mut ci = Table::new(
            "profile_ci",
            &["fit", "mle_alpha", "loglik_max", "ci_lo", "ci_hi", "ci_decades", "lower_open", "upper_open"],
        );
        profile_rows(&mut points, &mut ci, "ode-single", &ps);
        profile_rows(&mut points, &mut ci, "ode-panel", &pp);
        tables.push(points);
        tables.push(ci);
    }
    Ok(tables)
}

fn comparison_table(name: &str, fits: &[FitResult], criterion: Criterion) -> Result<Table, RunError> {
    let rows = compare_models(fits, criterion).stage("compute")?;
    let mut t = Table::new(name, &["model", "n_params", "r_squared", "aic", "bic", "delta_aic", "delta_bic"]);
    for r in rows {
        t.push(vec![
            r.model_kind.name().into(),
            r.n_params.into(),
            r.r_squared.into(),
            r.aic.into(),
            r.bic.into(),
            r.delta_aic.into(),
            r.delta_bic.into(),
        ]);
    }
    Ok(t)
}

fn comparison(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let d = load_scores(cfg)?;
    let alt = alt_options(cfg);
    let ode = fit_ode_single(&d.years, &d.scores, &d.driver, &single_options(cfg)).stage("compute")?;
    let alternatives = vec![
        fit_linear(&d.years, &d.scores).stage("compute")?,
        fit_exponential(&d.years, &d.scores, &alt).stage("compute")?,
        fit_logistic(&d.years, &d.scores, &alt).stage("compute")?,
    ];
    let mut single = vec![ode.clone()];
    single.extend(alternatives.iter().cloned());

    let panel = vec![
        fit_ode_panel(&d.series, &panel_options(cfg)).stage("compute")?,
        fit_alt_model(ModelKind::CountryLinear, &AltData::Panel(&d.series), &alt).stage("compute")?,
        fit_alt_model(ModelKind::ExponentialPanel, &AltData::Panel(&d.series), &alt).stage("compute")?,
    ];

    let rec = recovery_comparison(&ode, &alternatives, &d.years, &d.driver, cfg.fit.removal_year, cfg.fit.recovery_horizon)
        .stage("compute")?;
    let h_max = ode.param("h_max").unwrap_or(cfg.fit.h_max);
    let mut traj = Table::new("recovery_trajectories", &["model", "year", "score"]);
    // The ODE trajectory is sampled at whole years to match the other models.
    let per_year = (1.0 / DEFAULT_DT).round() as usize;
    for (t, h) in rec.ode.times.iter().zip(&rec.ode.h).step_by(per_year) {
        traj.push(vec![ModelKind::Ode.name().into(), (*t).into(), (h * h_max).into()]);
    }
    for a in &rec.alternatives {
        for (t, s) in a.times.iter().zip(&a.scores) {
            traj.push(vec![a.model_kind.name().into(), (*t).into(), (*s).into()]);
        }
    }
    let mut summary = Table::new(
        "recovery_summary",
        &["model", "baseline", "at_removal", "final", "closure", "capability_gain", "saddle_h", "below_saddle"],
    );
    let ode_final = rec.ode.h[rec.ode.h.len() - 1];
    let ode_baseline = ode.observed[0];
    let ode_at = rec.ode.h_at_removal * h_max;
    let gap = ode_baseline - ode_at;
    summary.push(vec![
        ModelKind::Ode.name().into(),
        ode_baseline.into(),
        ode_at.into(),
        (ode_final * h_max).into(),
        (if gap.abs() < 1e-12 { 1.0 } else { (ode_final * h_max - ode_at) / gap }).into(),
        rec.ode.gain.into(),
        rec.ode.saddle_h.into(),
        rec.ode.below_saddle.into(),
    ]);
    for a in &rec.alternatives {
        summary.push(vec![
            a.model_kind.name().into(),
            a.baseline.into(),
            a.at_removal.into(),
            a.scores[a.scores.len() - 1].into(),
            a.closure.into(),
            None::<f64>.into(),
            None::<f64>.into(),
            None::<bool>.into(),
        ]);
    }

    Ok(vec![
        comparison_table("comparison_single", &single, Criterion::Aic)?,
        comparison_table("comparison_panel", &panel, Criterion::Bic)?,
        traj,
        summary,
    ])
}

fn k_sweep_tables(sweep: &KSweep) -> Vec<Table> {
    let mut curve = Table::new("k_sweep", &["k", "median_h", "q25", "q75", "gradient"]);
    for (c, g) in sweep.curve.iter().zip(&sweep.gradient) {
        curve.push(vec![c.k.into(), c.value.into(), c.q25.into(), c.q75.into(), (*g).into()]);
    }
    let mut ks = Table::new("k_star", &["k_star", "max_gradient", "status", "non_monotone_segments"]);
    let non_monotone = sweep.non_monotone.len();
    match &sweep.k_star {
        Ok(k) => ks.push(vec![k.k_star.into(), k.max_gradient.into(), "interior".into(), non_monotone.into()]),
        Err(e) => ks.push(vec![None::<f64>.into(), None::<f64>.into(), e.to_string().into(), non_monotone.into()]),
    }
    vec![curve, ks]
}

fn threshold(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let sweep = k_sweep(exec, &cfg.abm_config(), &default_k_grid(), cfg.replicates, Statistic::Median, false).stage("compute")?;
    Ok(k_sweep_tables(&sweep))
}

fn heatmap(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let crisis = linspace(0.0, 0.25, 35);
    let hm = k_crisis_heatmap(exec, &cfg.abm_config(), &default_k_grid(), &crisis, cfg.replicates, Statistic::Median)
        .stage("compute")?;
    let mut grid = Table::new("heatmap", &["p_crisis", "k", "median_h"]);
    for (pc, row) in hm.p_crisis.iter().zip(&hm.values) {
        for (k, v) in hm.k.iter().zip(row) {
            grid.push(vec![(*pc).into(), (*k).into(), (*v).into()]);
        }
    }
    let mut contour = Table::new("contour", &["p_crisis", "level", "crossing", "k"]);
    for (pc, ks) in hm.p_crisis.iter().zip(&hm.contour) {
        if ks.is_empty() {
            contour.push(vec![(*pc).into(), hm.level.into(), None::<usize>.into(), None::<f64>.into()]);
        }
        for (i, k) in ks.iter().enumerate() {
            contour.push(vec![(*pc).into(), hm.level.into(), i.into(), (*k).into()]);
        }
    }
    Ok(vec![grid, contour])
}

fn antifragility(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let rows = antifragility_curve(exec, &cfg.abm_config(), &ANTIFRAGILITY_K, &CRISIS_LEVELS, cfg.replicates).stage("compute")?;
    let mut t = Table::new("antifragility", &["k", "p_crisis", "median_h", "iqr_lo", "iqr_hi", "mean_h", "ratio"]);
    for r in rows {
        t.push(vec![
            r.k.into(),
            r.p_crisis.into(),
            r.stats.median.into(),
            r.stats.q25.into(),
            r.stats.q75.into(),
            r.stats.mean.into(),
            r.ratio.into(),
        ]);
    }
    Ok(vec![t])
}

fn policy(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let rows = policy_curve(exec, &cfg.abm_config(), &PRACTICE_FRACTIONS, cfg.replicates).stage("compute")?;
    let mut t = Table::new("policy", &["practice_fraction", "median_h", "iqr_lo", "iqr_hi"]);
    let mut imp = Table::new("policy_improvement", &["practice_fraction", "improvement_pct"]);
    for r in rows {
        t.push(vec![r.practice_fraction.into(), r.stats.median.into(), r.stats.q25.into(), r.stats.q75.into()]);
        imp.push(vec![r.practice_fraction.into(), r.improvement_pct.into()]);
    }
    Ok(vec![t, imp])
}

fn benchmarks(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let scores = read_benchmarks(&data_path(cfg, DataKind::Benchmarks)).stage("ingest")?;
    let rows = kbar_table(&scores).stage("compute")?;
    let mut t = Table::new(
        "kbar",
        &["model", "release_date", "k_mmlu", "k_humaneval", "k_usmle", "k_bar", "kbar", "kbar_display", "above_threshold"],
    );
    for r in rows {
        t.push(vec![
            r.model.into(),
            r.release_date.into(),
            r.k[0].into(),
            r.k[1].into(),
            r.k[2].into(),
            r.k[3].into(),
            r.kbar.into(),
            r.kbar_display.into(),
            r.above_threshold.into(),
        ]);
    }
    Ok(vec![t])
}

fn parameter_space(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    // The adoption × social-pressure landscape uses fast rates so that the long
    // horizon reaches equilibrium; the regimes are placed at K = 1.
    let landscape = ModelParams { alpha: 1.0, beta: 0.5, k_ai: 0.7, ..cfg.params };
    let opts = LandscapeOptions::default();
    let marker_k = 1.0;
    let full = gamma_delta_grid(exec, &landscape, &linspace(0.01, 1.0, 100), &linspace(0.01, 1.0, 100), SystemState::AUTONOMOUS, marker_k, &opts)
        .stage("compute")?;
    let zoom = gamma_delta_grid(exec, &landscape, &linspace(0.4, 0.8, 120), &linspace(0.4, 0.8, 120), SystemState::AUTONOMOUS, marker_k, &opts)
        .stage("compute")?;
    let grid_table = |name: &str, g: &capdyn_core::sweep::GammaDeltaGrid| {
        let mut t = Table::new(name, &["gamma", "delta", "h"]);
        for (gamma, row) in g.gamma.iter().zip(&g.h) {
            for (delta, h) in g.delta.iter().zip(row) {
                t.push(vec![(*gamma).into(), (*delta).into(), (*h).into()]);
            }
        }
        t
    };
    let mut markers = Table::new("historical_markers", &["name", "cost", "gamma", "scope", "k_ai", "h", "d", "basin"]);
    for m in &full.markers {
        markers.push(vec![
            m.name.as_str().into(),
            m.cost.into(),
            m.gamma.into(),
            m.scope.into(),
            m.k_ai.into(),
            m.h.into(),
            m.d.into(),
            basin_name(m.basin).into(),
        ]);
    }
    let ic = initial_condition_grid(exec, &cfg.params, &linspace(0.0, 1.0, 21), &linspace(0.05, 1.0, 20), cfg.abm.d_init, &opts)
        .stage("compute")?;
    let mut ic_table = Table::new("initial_conditions", &["h0", "scope", "h", "basin"]);
    for (i, h0) in ic.h0.iter().enumerate() {
        for (j, s) in ic.scope.iter().enumerate() {
            ic_table.push(vec![(*h0).into(), (*s).into(), ic.h[i][j].into(), basin_name(ic.basin[i][j]).into()]);
        }
    }
    Ok(vec![grid_table("gamma_delta", &full), grid_table("gamma_delta_zoom", &zoom), markers, ic_table])
}

fn basin_name(b: capdyn_core::ode::Basin) -> &'static str {
    match b {
        capdyn_core::ode::Basin::Autonomous => "autonomous",
        capdyn_core::ode::Basin::Dependent => "dependent",
        capdyn_core::ode::Basin::Undecided => "undecided",
    }
}

fn epsilon() -> Result<Vec<Table>, RunError> {
    let sw = epsilon_sweep(&EPSILON_GRID, 0.0, 0.5).stage("compute")?;
    let mut t = Table::new("epsilon_recovery", &["epsilon", "recovery_time"]);
    for (e, time) in sw.epsilon.iter().zip(&sw.time) {
        t.push(vec![(*e).into(), (*time).into()]);
    }
    let mut s = Table::new("epsilon_summary", &["ratio", "strictly_decreasing"]);
    s.push(vec![sw.ratio.into(), sw.strictly_decreasing.into()]);
    Ok(vec![t, s])
}

fn two_skill() -> Result<Vec<Table>, RunError> {
    let config = TwoSkillConfig::default();
    let mut series = Table::new("two_skill", &["scenario", "t", "h1", "h2", "d1", "d2", "tau1", "tau2", "aggregate"]);
    let mut summary = Table::new("two_skill_summary", &["scenario", "h1", "h2", "aggregate"]);
    let per_unit = (1.0 / config.dt).round() as usize;
    for scenario in [Scenario::A, Scenario::B, Scenario::C] {
        let label = format!("{scenario:?}");
        let traj = simulate_two_skill(&config, scenario).stage("compute")?;
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(per_unit) {
            series.push(vec![
                label.as_str().into(),
                (*t).into(),
                s.h1.into(),
                s.h2.into(),
                s.d1.into(),
                s.d2.into(),
                s.tau1.into(),
                s.tau2.into(),
                s.aggregate().into(),
            ]);
        }
        let last = traj.last();
        summary.push(vec![label.into(), last.h1.into(), last.h2.into(), last.aggregate().into()]);
    }
    Ok(vec![series, summary])
}

fn sensitivity(cfg: &RunConfig, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let base = cfg.abm_config();
    let grid = default_k_grid();
    let mut detail = Table::new("sensitivity", &["parameter", "value", "k_star", "max_gradient", "interior"]);
    let mut ranges = Table::new("sensitivity_range", &["parameter", "k_star_min", "k_star_max", "all_interior"]);
    for param in SensitivityParam::ALL {
        let r = sensitivity_suite(exec, &base, param, SENSITIVITY_VALUES, &grid, cfg.sensitivity_replicates).stage("compute")?;
        for (v, s) in r.values.iter().zip(&r.sweeps) {
            let (k, g) = match &s.k_star {
                Ok(k) => (Some(k.k_star), Some(k.max_gradient)),
                Err(_) => (None, None),
            };
            detail.push(vec![param.name().into(), (*v).into(), k.into(), g.into(), s.k_star.is_ok().into()]);
        }
        let range = r.k_star_range();
        ranges.push(vec![param.name().into(), range.map(|r| r.0).into(), range.map(|r| r.1).into(), r.all_interior().into()]);
    }
    Ok(vec![detail, ranges])
}

fn simulate(cfg: &RunConfig, mode: SimulateMode, t_end: f64) -> Result<Vec<Table>, RunError> {
    let mut tables = Vec::new();
    if matches!(mode, SimulateMode::Ode | SimulateMode::Both) {
        let initial = SystemState::new(cfg.abm.h_init, cfg.abm.d_init);
        let traj = integrate(&cfg.params, initial, t_end, DEFAULT_DT).stage("compute")?;
        let mut t = Table::new("ode_trajectory", &["t", "h", "d"]);
        let per_unit = (1.0 / DEFAULT_DT).round() as usize;
        for (time, s) in traj.times.iter().zip(&traj.states).step_by(per_unit) {
            t.push(vec![(*time).into(), s.h.into(), s.d.into()]);
        }
        tables.push(t);
    }
    if matches!(mode, SimulateMode::Abm | SimulateMode::Both) {
        let run = abm::run(&cfg.abm_config()).stage("compute")?;
        let mut t = Table::new("abm_run", &["step", "mean_h", "mean_d", "crisis"]);
        for (i, (h, d)) in run.mean_h.iter().zip(&run.mean_d).enumerate() {
            t.push(vec![i.into(), (*h).into(), (*d).into(), run.crisis_steps.contains(&i).into()]);
        }
        let mut s = Table::new("abm_summary", &["equilibrium_h", "min_h_during_crisis", "crisis_steps"]);
        s.push(vec![run.equilibrium_h.into(), run.min_h_during_crisis.into(), run.crisis_steps.len().into()]);
        tables.push(t);
        tables.push(s);
    }
    Ok(tables)
}

fn sweep(cfg: &RunConfig, axes: &[Axis], statistic: Statistic, exec: &Executor) -> Result<Vec<Table>, RunError> {
    let spec = SweepSpec { axes: axes.to_vec(), replicates: cfg.replicates, base_config: cfg.abm_config(), statistic };
    let out = spec.run(exec).stage("compute")?;
    let mut columns: Vec<&str> = axes.iter().map(|a| a.param.name()).collect();
    columns.extend(["statistic", "median_h", "mean_h", "q25", "q75", "replicates"]);
    let mut t = Table::new("sweep", &columns);
    let stat_name = match statistic {
        Statistic::Median => "median",
        Statistic::Mean => "mean",
    };
    for (coords, p) in out.coords.iter().zip(&out.points) {
        let mut row: Vec<crate::emit::Cell> = coords.iter().map(|&c| c.into()).collect();
        row.extend([
            stat_name.into(),
            p.stats.median.into(),
            p.stats.mean.into(),
            p.stats.q25.into(),
            p.stats.q75.into(),
            p.stats.n.into(),
        ]);
        t.push(row);
    }
    Ok(vec![t])
}

/// The directory holding the bundled data, for tests and tools run from a crate.
pub fn bundled_data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}
