//! Plot-ready tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Text(String::new()), Into::into)
    }
}

/// Rounds to 10 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.9e}").parse().expect("round-trips")
}

/// Plain decimal rendering at 10 significant digits (no exponent, no separators).
pub fn format_num(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(v);
    if r == 0.0 {
        return "0".into();
    }
    // `Display` for f64 never uses exponent notation.
    format!("{r}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(round_sig(*v)).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({ "table": self.name, "columns": self.columns, "rows": rows }))
            .expect("json");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultManifest {
    pub experiment: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub threads: usize,
    pub format: Format,
    pub wall_time: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("output directory {path} is not writable: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error("no tables to write")]
    Empty,
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// Creates `dir` and proves it writable with a probe file.
pub fn ensure_writable(dir: &Path) -> Result<(), EmitError> {
    let err = |source| EmitError::Unwritable { path: dir.into(), source };
    std::fs::create_dir_all(dir).map_err(err)?;
    let probe = dir.join(".capdyn-write-probe");
    std::fs::write(&probe, b"").map_err(err)?;
    std::fs::remove_file(&probe).map_err(err)
}

/// Writes every table plus `manifest.json`; on failure removes whatever it wrote.
pub fn emit_results(dir: &Path, tables: &[Table], format: Format, mut manifest: ResultManifest) -> Result<ResultManifest, EmitError> {
    if tables.is_empty() || tables.iter().any(|t| t.rows.is_empty()) {
        return Err(EmitError::Empty);
    }
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        for t in tables {
            let (ext, body) = match format {
                Format::Csv => ("csv", t.to_csv()),
                Format::Json => ("json", t.to_json()),
            };
            let name = format!("{}.{ext}", t.name);
            let path = dir.join(&name);
            std::fs::write(&path, body).map_err(|source| EmitError::Write { path: path.clone(), source })?;
            written.push(path);
            manifest.files.push(FileEntry { path: name, rows: t.rows.len() });
        }
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
        std::fs::write(&path, body).map_err(|source| EmitError::Write { path: path.clone(), source })?;
        Ok(())
    })();
    if let Err(e) = result {
        for p in written {
            let _ = std::fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_num(0.1 + 0.2), "0.3");
        assert_eq!(format_num(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_num(123456789012.0), "123456789000");
        assert_eq!(format_num(2.5e-7), "0.00000025");
        assert_eq!(format_num(-1.0 / 7.0), "-0.1428571429");
        assert_eq!(format_num(0.0), "0");
        assert_eq!(format_num(42.0), "42");
    }

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new("t", &["name", "x"]);
        t.push(vec!["a,b".into(), (1.0 / 3.0).into()]);
        let csv = t.to_csv();
        assert_eq!(csv, "name,x\r\n\"a,b\",0.3333333333\r\n");
        let json: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json["rows"][0]["x"].as_f64().unwrap(), "0.3333333333".parse::<f64>().unwrap());
    }
}
