//! Layered run configuration: defaults < TOML file < `--set key=value` < flags.

use std::path::{Path, PathBuf};

use capdyn_core::abm::{AbmConfig, DelegationDraw, EntryMode};
use capdyn_core::ModelParams;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config file {path} is not valid TOML: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config key `{key}` expects {expected}, got {found}")]
    TypeMismatch { key: String, expected: &'static str, found: &'static str },
    #[error("override `{0}` must have the form key=value")]
    BadOverride(String),
    #[error("config key `{key}` = {value} is out of range; valid range {range}")]
    OutOfRange { key: String, value: String, range: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Agent-based model settings (the model parameters and seed live at top level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmSettings {
    pub n_agents: usize,
    pub t_steps: usize,
    pub dt: f64,
    pub sigma_h: f64,
    pub sigma_d: f64,
    pub p_crisis: f64,
    pub practice_fraction: f64,
    pub turnover_rate: f64,
    /// `population-mean` or `fixed`.
    pub entry_mode: String,
    /// Entrant capability when `entry_mode = "fixed"`.
    pub entry_h: f64,
    pub h_init: f64,
    pub d_init: f64,
    pub h_init_sd: f64,
    pub d_init_sd: f64,
    pub persistent_crisis_reset: bool,
    pub delegation_draw: DelegationDraw,
}

impl Default for AbmSettings {
    fn default() -> Self {
        let c = AbmConfig::default();
        Self {
            n_agents: c.n_agents,
            t_steps: c.t_steps,
            dt: c.dt,
            sigma_h: c.sigma_h,
            sigma_d: c.sigma_d,
            p_crisis: c.p_crisis,
            practice_fraction: c.practice_fraction,
            turnover_rate: c.turnover_rate,
            entry_mode: "population-mean".into(),
            entry_h: c.h_init,
            h_init: c.h_init,
            d_init: c.d_init,
            h_init_sd: c.h_init_sd,
            d_init_sd: c.d_init_sd,
            persistent_crisis_reset: c.persistent_crisis_reset,
            delegation_draw: c.delegation_draw,
        }
    }
}

/// Estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    /// Fixed score ceiling for the single-series fit.
    pub h_max: f64,
    pub starts: usize,
    pub logistic_midpoint: f64,
    /// Removal year and horizon for the recovery comparison.
    pub removal_year: f64,
    pub recovery_horizon: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { h_max: 787.0, starts: 16, logistic_midpoint: 2012.0, removal_year: 2022.0, recovery_horizon: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Name recorded in the manifest and used as the output subdirectory.
    pub experiment: String,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub data_dir: PathBuf,
    pub format: Format,
    /// Monte Carlo replicates per grid point.
    pub replicates: usize,
    /// Replicates per grid point in the sensitivity suite.
    pub sensitivity_replicates: usize,
    pub params: ModelParams,
    pub abm: AbmSettings,
    pub fit: FitSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "custom".into(),
            seed: 42,
            threads: 0,
            output_dir: PathBuf::from("results"),
            data_dir: PathBuf::from("data"),
            format: Format::Csv,
            replicates: 50,
            sensitivity_replicates: 10,
            params: ModelParams::baseline(),
            abm: AbmSettings::default(),
            fit: FitSettings::default(),
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a number",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

/// Merges `overlay` into `base`, rejecting keys `base` does not have and scalar
/// type changes (integers are accepted where numbers are expected).
fn merge(base: &mut Table, overlay: Table, prefix: &str) -> Result<(), ConfigError> {
    for (k, v) in overlay {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let Some(slot) = base.get_mut(&k) else {
            return Err(ConfigError::UnknownKey { key });
        };
        match (slot, v) {
            (Value::Table(b), Value::Table(o)) => merge(b, o, &key)?,
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(i as f64),
            (slot, v) if std::mem::discriminant(slot) == std::mem::discriminant(&v) => *slot = v,
            (slot, v) => return Err(ConfigError::TypeMismatch { key, expected: kind(slot), found: kind(&v) }),
        }
    }
    Ok(())
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to a bare
/// string.
fn parse_override(s: &str) -> Result<Table, ConfigError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| ConfigError::BadOverride(s.into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(s.into()));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let mut table = Table::new();
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = &mut table;
    for p in &parts[..parts.len() - 1] {
        cur = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())).as_table_mut().expect("fresh table");
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(table)
}

impl RunConfig {
    /// Resolves defaults, then the optional file, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        Self::resolve_with(&[], file, overrides)
    }

    /// As [`RunConfig::resolve`], with `presets` applied between the defaults and
    /// the file.
    pub fn resolve_with(presets: &[String], file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let Value::Table(mut table) = Value::try_from(Self::default()).map_err(|e| ConfigError::Invalid(e.to_string()))? else {
            unreachable!("a struct serialises to a table")
        };
        for o in presets {
            merge(&mut table, parse_override(o)?, "")?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
            let overlay: Table =
                text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax { path: path.into(), message: e.to_string() })?;
            merge(&mut table, overlay, "")?;
        }
        for o in overrides {
            merge(&mut table, parse_override(o)?, "")?;
        }
        let cfg: Self = Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use capdyn_core::Error as E;
        let named = |prefix: &str, e: E| match e {
            E::OutOfRange { name, value, range } => {
                ConfigError::OutOfRange { key: format!("{prefix}{name}"), value: value.to_string(), range: range.into() }
            }
            other => ConfigError::Invalid(other.to_string()),
        };
        self.params.validate().map_err(|e| named("params.", e))?;
        if !matches!(self.abm.entry_mode.as_str(), "population-mean" | "fixed") {
            return Err(ConfigError::OutOfRange {
                key: "abm.entry_mode".into(),
                value: format!("{:?}", self.abm.entry_mode),
                range: "one of population-mean, fixed".into(),
            });
        }
        self.abm_config().validate().map_err(|e| named("abm.", e))?;
        for (key, v) in [("replicates", self.replicates), ("sensitivity_replicates", self.sensitivity_replicates), ("fit.starts", self.fit.starts)] {
            if v == 0 {
                return Err(ConfigError::OutOfRange { key: key.into(), value: "0".into(), range: "[1, inf)".into() });
            }
        }
        if !(500.0..=1200.0).contains(&self.fit.h_max) {
            return Err(ConfigError::OutOfRange { key: "fit.h_max".into(), value: self.fit.h_max.to_string(), range: "[500, 1200]".into() });
        }
        if self.fit.recovery_horizon.is_nan() || self.fit.recovery_horizon <= 0.0 {
            return Err(ConfigError::OutOfRange {
                key: "fit.recovery_horizon".into(),
                value: self.fit.recovery_horizon.to_string(),
                range: "(0, inf)".into(),
            });
        }
        Ok(())
    }

    pub fn abm_config(&self) -> AbmConfig {
        let a = &self.abm;
        AbmConfig {
            n_agents: a.n_agents,
            t_steps: a.t_steps,
            dt: a.dt,
            sigma_h: a.sigma_h,
            sigma_d: a.sigma_d,
            p_crisis: a.p_crisis,
            practice_fraction: a.practice_fraction,
            turnover_rate: a.turnover_rate,
            entry_mode: if a.entry_mode == "fixed" { EntryMode::Fixed(a.entry_h) } else { EntryMode::PopulationMean },
            params: self.params,
            seed: self.seed,
            h_init: a.h_init,
            d_init: a.d_init,
            h_init_sd: a.h_init_sd,
            d_init_sd: a.d_init_sd,
            persistent_crisis_reset: a.persistent_crisis_reset,
            delegation_draw: a.delegation_draw,
        }
    }

    pub fn thread_count(&self) -> Option<usize> {
        (self.threads > 0).then_some(self.threads)
    }
}
