//! Observation sets and exogenous adoption drivers.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of the cross-country average series in PISA data.
pub const AVERAGE_LABEL: &str = "OECD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreObservation {
    pub country: String,
    pub year: i32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionObservation {
    pub country: String,
    pub year: i32,
    pub fraction: f64,
}

/// An exogenous delegation/adoption series `a(t) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Driver {
    Constant(f64),
    /// `a(t) = L / (1 + exp(−r (t − t_mid)))`.
    Logistic { level: f64, rate: f64, midpoint: f64 },
    /// Linear between knots, flat beyond the first and last knot.
    PiecewiseLinear { years: Vec<f64>, values: Vec<f64> },
}

impl Driver {
    /// Logistic curve with midpoint `t_mid` through `(t0, a0)` and `(t1, a1)`,
    /// where `t0 < t_mid < t1` and `a0 < a1`.
    pub fn logistic_through(t0: f64, a0: f64, t1: f64, a1: f64, t_mid: f64) -> Result<Self> {
        if !(t0 < t_mid && t_mid < t1 && 0.0 < a0 && a0 < a1 && a1 < 1.0) {
            return Err(Error::InvalidData("logistic anchors must satisfy t0 < t_mid < t1 and 0 < a0 < a1 < 1".into()));
        }
        // For a given rate, L is fixed by the upper anchor; bisect the rate on the
        // lower anchor.
        let level = |r: f64| a1 * (1.0 + (-r * (t1 - t_mid)).exp());
        let f = |r: f64| level(r) / (1.0 + (r * (t_mid - t0)).exp()) - a0;
        let (mut lo, mut hi) = (1e-6, 50.0);
        if f(lo).signum() == f(hi).signum() {
            return Err(Error::InvalidData("logistic anchors cannot be matched".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rate = 0.5 * (lo + hi);
        Ok(Driver::Logistic { level: level(rate), rate, midpoint: t_mid })
    }

    /// Default average-series driver: 5% in 2003, 90% in 2022, midpoint 2012.
    pub fn default_average() -> Self {
        Self::logistic_through(2003.0, 0.05, 2022.0, 0.90, 2012.0).expect("valid anchors")
    }

    pub fn piecewise(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidData("driver series is empty".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidData("driver series has duplicate years".into()));
        }
        let (years, values) = points.into_iter().unzip();
        Ok(Driver::PiecewiseLinear { years, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Driver::Constant(a) => *a,
            Driver::Logistic { level, rate, midpoint } => level / (1.0 + (-rate * (t - midpoint)).exp()),
            Driver::PiecewiseLinear { years, values } => {
                if t <= years[0] {
                    return values[0];
                }
                let last = years.len() - 1;
                if t >= years[last] {
                    return values[last];
                }
                let i = years.partition_point(|&y| y <= t) - 1;
                let w = (t - years[i]) / (years[i + 1] - years[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }
}

/// Country-year scores paired with adoption drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub observations: Vec<ScoreObservation>,
    pub drivers: Vec<AdoptionObservation>,
}

/// One country's observations, sorted by year.
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries {
    pub country: String,
    pub years: Vec<f64>,
    pub scores: Vec<f64>,
    pub driver: Driver,
}

impl PanelDataset {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for o in &self.observations {
            if !(200.0..=700.0).contains(&o.score) {
                return Err(Error::InvalidData(format!("{} {}: score {} outside [200, 700]", o.country, o.year, o.score)));
            }
            if !seen.insert((o.country.as_str(), o.year)) {
                return Err(Error::InvalidData(format!("duplicate observation {} {}", o.country, o.year)));
            }
        }
        let mut seen = BTreeSet::new();
        for d in &self.drivers {
            if !(0.0..=1.0).contains(&d.fraction) {
                return Err(Error::InvalidData(format!("{} {}: adoption {} outside [0, 1]", d.country, d.year, d.fraction)));
            }
            if !seen.insert((d.country.as_str(), d.year)) {
                return Err(Error::InvalidData(format!("duplicate adoption value {} {}", d.country, d.year)));
            }
        }
        let with_driver: BTreeSet<&str> = self.drivers.iter().map(|d| d.country.as_str()).collect();
        for c in self.countries() {
            if !with_driver.contains(c.as_str()) {
                return Err(Error::InvalidData(format!("country {c} has no adoption series")));
            }
        }
        Ok(())
    }

    /// Countries with score observations (excluding the average series), in order
    /// of first appearance.
    pub fn countries(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for o in &self.observations {
            if o.country != AVERAGE_LABEL && !out.contains(&o.country) {
                out.push(o.country.clone());
            }
        }
        out
    }

    /// Per-country series with piecewise-linear drivers.
    pub fn series(&self) -> Result<Vec<CountrySeries>> {
        self.validate()?;
        let mut drivers: HashMap<&str, Vec<(f64, f64)>> = HashMap::new();
        for d in &self.drivers {
            drivers.entry(d.country.as_str()).or_default().push((d.year as f64, d.fraction));
        }
        self.countries()
            .into_iter()
            .map(|c| {
                let mut obs: Vec<(f64, f64)> = self
                    .observations
                    .iter()
                    .filter(|o| o.country == c)
                    .map(|o| (o.year as f64, o.score))
                    .collect();
                obs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let driver = Driver::piecewise(drivers[c.as_str()].clone())?;
                let (years, scores) = obs.into_iter().unzip();
                Ok(CountrySeries { country: c, years, scores, driver })
            })
            .collect()
    }

    /// The cross-country average series `(years, scores)`, sorted by year.
    pub fn average_series(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut obs: Vec<(f64, f64)> = self
            .observations
            .iter()
            .filter(|o| o.country == AVERAGE_LABEL)
            .map(|o| (o.year as f64, o.score))
            .collect();
        if obs.is_empty() {
            return None;
        }
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(obs.into_iter().unzip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_hits_anchors() {
        let d = Driver::default_average();
        assert!((d.at(2003.0) - 0.05).abs() < 1e-10);
        assert!((d.at(2022.0) - 0.90).abs() < 1e-10);
        assert!(d.at(2012.0) < d.at(2013.0));
    }

    #[test]
    fn piecewise_interpolates_and_clamps() {
        let d = Driver::piecewise(vec![(2006.0, 0.4), (2003.0, 0.2)]).unwrap();
        assert_eq!(d.at(2000.0), 0.2);
        assert!((d.at(2004.5) - 0.3).abs() < 1e-12);
        assert_eq!(d.at(2030.0), 0.4);
        assert!(Driver::piecewise(vec![(2003.0, 0.1), (2003.0, 0.2)]).is_err());
    }

    #[test]
    fn panel_validation() {
        let obs = |c: &str, y, s| ScoreObservation { country: c.into(), year: y, score: s };
        let drv = |c: &str, y, f| AdoptionObservation { country: c.into(), year: y, fraction: f };
        let mut p = PanelDataset {
            observations: vec![obs("A", 2003, 500.0), obs("A", 2006, 490.0), obs("OECD", 2003, 500.0)],
            drivers: vec![drv("A", 2003, 0.5)],
        };
        assert!(p.validate().is_ok());
        assert_eq!(p.countries(), vec!["A".to_string()]);
        p.observations.push(obs("B", 2003, 480.0));
        assert!(p.validate().is_err());
        p.drivers.push(drv("B", 2003, 1.5));
        assert!(p.validate().is_err());
    }
}
