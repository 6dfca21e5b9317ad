//! Operationalising AI capability `K` from benchmark scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold against which mean capability is flagged.
pub const K_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "MMLU")]
    Mmlu,
    HumanEval,
    #[serde(rename = "USMLE")]
    Usmle,
    Bar,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Mmlu, Domain::HumanEval, Domain::Usmle, Domain::Bar];
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Mmlu => "MMLU",
            Domain::HumanEval => "HumanEval",
            Domain::Usmle => "USMLE",
            Domain::Bar => "Bar",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidData(format!("unknown benchmark domain `{s}` (expected MMLU, HumanEval, USMLE or Bar)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScore {
    pub model: String,
    pub release_date: String,
    pub domain: Domain,
    pub ai_score: f64,
    pub human_baseline: f64,
}

/// `min(ai_score / human_baseline, 1)`.
pub fn k_ratio(score: &BenchmarkScore) -> Result<f64> {
    if score.human_baseline.is_nan() || score.human_baseline <= 0.0 {
        return Err(Error::OutOfRange { name: "human_baseline", value: score.human_baseline, range: "(0, 1.2]" });
    }
    Ok((score.ai_score / score.human_baseline).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KBar {
    pub model: String,
    pub release_date: String,
    /// Per-domain ratios in [`Domain::ALL`] order.
    pub k: [f64; 4],
    pub kbar: f64,
    /// `kbar` rounded to two decimals.
    pub kbar_display: f64,
    pub above_threshold: bool,
}

/// Unweighted mean of the four domain ratios for one model.
pub fn kbar(scores: &[BenchmarkScore]) -> Result<KBar> {
    let first = scores.first().ok_or_else(|| Error::MissingDomain("(no scores)".into()))?;
    let mut k = [f64::NAN; 4];
    for s in scores {
        if s.model != first.model {
            return Err(Error::InvalidData(format!("scores mix models `{}` and `{}`", first.model, s.model)));
        }
        let i = Domain::ALL.iter().position(|d| *d == s.domain).expect("exhaustive");
        if !k[i].is_nan() {
            return Err(Error::InvalidData(format!("duplicate {} score for {}", s.domain, s.model)));
        }
        k[i] = k_ratio(s)?;
    }
    if let Some(i) = k.iter().position(|v| v.is_nan()) {
        return Err(Error::MissingDomain(format!("{} for model {}", Domain::ALL[i], first.model)));
    }
    let mean = k.iter().sum::<f64>() / 4.0;
    Ok(KBar {
        model: first.model.clone(),
        release_date: first.release_date.clone(),
        k,
        kbar: mean,
        kbar_display: (mean * 100.0).round() / 100.0,
        above_threshold: mean >= K_THRESHOLD,
    })
}

/// [`kbar`] for every model, in order of first appearance.
pub fn kbar_table(scores: &[BenchmarkScore]) -> Result<Vec<KBar>> {
    let mut models: Vec<&str> = Vec::new();
    for s in scores {
        if !models.contains(&s.model.as_str()) {
            models.push(&s.model);
        }
    }
    models
        .into_iter()
        .map(|m| kbar(&scores.iter().filter(|s| s.model == m).cloned().collect::<Vec<_>>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(domain: Domain, ai: f64, base: f64) -> BenchmarkScore {
        BenchmarkScore { model: "m".into(), release_date: "2024-01".into(), domain, ai_score: ai, human_baseline: base }
    }

    #[test]
    fn ratio_is_capped() {
        assert_eq!(k_ratio(&score(Domain::Usmle, 0.90, 0.87)).unwrap(), 1.0);
        assert_eq!(k_ratio(&score(Domain::Bar, 0.0, 0.9)).unwrap(), 0.0);
        assert!(k_ratio(&score(Domain::Bar, 0.5, 0.0)).is_err());
    }

    #[test]
    fn all_ones() {
        let s: Vec<_> = Domain::ALL.iter().map(|&d| score(d, 1.0, 1.0)).collect();
        let k = kbar(&s).unwrap();
        assert_eq!(k.kbar_display, 1.0);
        assert!(k.above_threshold);
    }

    #[test]
    fn missing_domain_rejected() {
        let s: Vec<_> = Domain::ALL[..3].iter().map(|&d| score(d, 1.0, 1.0)).collect();
        assert!(matches!(kbar(&s), Err(Error::MissingDomain(_))));
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("humaneval".parse::<Domain>().unwrap(), Domain::HumanEval);
        assert!("chess".parse::<Domain>().is_err());
    }
}
