//! Typed CSV ingestion with per-line diagnostics.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use capdyn_core::estimation::{AdoptionObservation, BenchmarkScore, DeskillObservation, Domain, ScoreObservation};
use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataKind {
    Pisa,
    Adoption,
    Benchmarks,
    Deskill,
}

impl DataKind {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            DataKind::Pisa => &["country", "year", "score"],
            DataKind::Adoption => &["country", "year", "fraction"],
            DataKind::Benchmarks => &["model", "release_date", "domain", "ai_score", "human_baseline"],
            DataKind::Deskill => &["domain", "decline", "duration", "time_unit"],
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            DataKind::Pisa => "pisa.csv",
            DataKind::Adoption => "adoption.csv",
            DataKind::Benchmarks => "benchmarks.csv",
            DataKind::Deskill => "deskill.csv",
        }
    }
}

/// One problem on one line (1-based, counting the header as line 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: PathBuf, expected: String, found: String },
    #[error("{path}: {count} invalid row(s):\n{}", list(.diagnostics))]
    Rows { path: PathBuf, count: usize, diagnostics: Vec<Diagnostic> },
}

fn list(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  line {}: {}", d.line, d.message)).collect::<Vec<_>>().join("\n")
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Deserialize)]
struct PisaRow {
    country: String,
    year: i32,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct AdoptionRow {
    country: String,
    year: i32,
    fraction: f64,
}

#[derive(Debug, Deserialize)]
struct BenchmarkRow {
    model: String,
    release_date: String,
    domain: String,
    ai_score: f64,
    human_baseline: f64,
}

#[derive(Debug, Deserialize)]
struct DeskillRow {
    domain: String,
    decline: f64,
    duration: f64,
    time_unit: String,
}

/// Reads every row, converting each with `check` (which returns the record and its
/// uniqueness key); collects all failures before reporting.
fn read<R, T, K>(path: &Path, kind: DataKind, mut check: impl FnMut(R) -> Result<(T, K), String>) -> Result<Vec<T>, IngestError>
where
    R: DeserializeOwned,
    K: std::hash::Hash + Eq + fmt::Debug,
{
    let io = |source| IngestError::Io { path: path.into(), source };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Rows { path: path.into(), count: 1, diagnostics: vec![Diagnostic { line: 1, message: e.to_string() }] })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != kind.header() {
        return Err(IngestError::Header { path: path.into(), expected: kind.header().join(","), found: header.join(",") });
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut diagnostics = Vec::new();
    let headers = csv::StringRecord::from(kind.header().to_vec());
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                diagnostics.push(Diagnostic { line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let row: R = match record.deserialize(Some(&headers)) {
            Ok(row) => row,
            Err(e) => {
                let message = match e.kind() {
                    csv::ErrorKind::Deserialize { err, .. } => match err.field() {
                        Some(i) => format!("column `{}`: {}", kind.header().get(i as usize).unwrap_or(&"?"), err.kind()),
                        None => err.to_string(),
                    },
                    _ => e.to_string(),
                };
                diagnostics.push(Diagnostic { line, message });
                continue;
            }
        };
        match check(row) {
            Err(message) => diagnostics.push(Diagnostic { line, message }),
            Ok((record, key)) => {
                if seen.contains(&key) {
                    diagnostics.push(Diagnostic { line, message: format!("duplicate entry {key:?}") });
                } else {
                    seen.insert(key);
                    out.push(record);
                }
            }
        }
    }
    if diagnostics.is_empty() {
        Ok(out)
    } else {
        Err(IngestError::Rows { path: path.into(), count: diagnostics.len(), diagnostics })
    }
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64, lo_open: bool, range: &str) -> Result<(), String> {
    let ok = v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && v <= hi;
    if ok {
        Ok(())
    } else {
        Err(format!("{name} {v} outside {range}"))
    }
}

pub fn read_pisa(path: &Path) -> Result<Vec<ScoreObservation>, IngestError> {
    read(path, DataKind::Pisa, |r: PisaRow| {
        in_range("score", r.score, 200.0, 700.0, false, "[200, 700]")?;
        let key = (r.country.clone(), r.year);
        Ok((ScoreObservation { country: r.country, year: r.year, score: r.score }, key))
    })
}

pub fn read_adoption(path: &Path) -> Result<Vec<AdoptionObservation>, IngestError> {
    read(path, DataKind::Adoption, |r: AdoptionRow| {
        in_range("fraction", r.fraction, 0.0, 1.0, false, "[0, 1]")?;
        let key = (r.country.clone(), r.year);
        Ok((AdoptionObservation { country: r.country, year: r.year, fraction: r.fraction }, key))
    })
}

pub fn read_benchmarks(path: &Path) -> Result<Vec<BenchmarkScore>, IngestError> {
    read(path, DataKind::Benchmarks, |r: BenchmarkRow| {
        let domain: Domain = r.domain.parse().map_err(|e: capdyn_core::Error| e.to_string())?;
        in_range("ai_score", r.ai_score, 0.0, 1.2, true, "(0, 1.2]")?;
        in_range("human_baseline", r.human_baseline, 0.0, 1.2, true, "(0, 1.2]")?;
        let key = (r.model.clone(), domain);
        Ok((
            BenchmarkScore { model: r.model, release_date: r.release_date, domain, ai_score: r.ai_score, human_baseline: r.human_baseline },
            key,
        ))
    })
}

pub fn read_deskill(path: &Path) -> Result<Vec<DeskillObservation>, IngestError> {
    read(path, DataKind::Deskill, |r: DeskillRow| {
        if !(r.decline > 0.0 && r.decline < 1.0) {
            return Err(format!("decline {} outside (0, 1)", r.decline));
        }
        in_range("duration", r.duration, 0.0, f64::INFINITY, true, "(0, inf)")?;
        let key = r.domain.clone();
        Ok((DeskillObservation { domain: r.domain, decline: r.decline, duration: r.duration, time_unit: r.time_unit }, key))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reports_every_bad_line() {
        let f = file("country,year,fraction\nA,2003,0.5\nA,2006,1.5\nB,x,0.2\nA,2003,0.1\n");
        let err = read_adoption(f.path()).unwrap_err();
        let IngestError::Rows { diagnostics, .. } = &err else { panic!("{err}") };
        let lines: Vec<u64> = diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![3, 4, 5], "{err}");
        assert!(err.to_string().contains("fraction 1.5"));
        assert!(err.to_string().contains("column `year`"));
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn wrong_header_rejected() {
        let f = file("country,score,year\nA,500,2003\n");
        assert!(matches!(read_pisa(f.path()), Err(IngestError::Header { .. })));
    }

    #[test]
    fn deskill_bounds() {
        let f = file("domain,decline,duration,time_unit\nx,1.0,3,week\n");
        assert!(read_deskill(f.path()).is_err());
        let f = file("domain,decline,duration,time_unit\nx,0.2,3,week\n");
        assert_eq!(read_deskill(f.path()).unwrap().len(), 1);
    }
}
