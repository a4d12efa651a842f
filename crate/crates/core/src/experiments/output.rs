//! Tables, number formatting and file emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::error::Result;

/// Crate version stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Na,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Na, Cell::Num)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// Rounds to 12 significant digits; non-finite values become `None`.
pub fn round12(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(0.0);
    }
    format!("{x:.11e}").parse().ok()
}

/// 12 significant digits, shortest form; `NA` for non-finite values.
pub fn fmt_num(x: f64) -> String {
    round12(x).map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&fmt_num(*x)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Na => f.write_str("NA"),
        }
    }
}

/// One CSV file: fixed header, one row per evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Table { name: name.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    /// Numeric value of `column` in `row`, if present and numeric.
    pub fn num(&self, row: usize, column: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(column)?)? {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn to_csv(&self, hash: &str) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(ToString::to_string))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
        Ok(format!("{}\n{body}", header_comment(hash)))
    }
}

pub fn header_comment(hash: &str) -> String {
    format!("# review-lottery {VERSION} config={hash}")
}

/// JSON number with 12 significant digits, `null` when non-finite.
pub fn json_num(x: f64) -> Value {
    round12(x).and_then(Number::from_f64).map_or(Value::Null, Value::Number)
}

/// Rounds every float in `v` to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => n.as_f64().map_or(Value::Null, json_num),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_json).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_json(v))).collect::<Map<_, _>>()),
        other => other,
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub documents: Vec<(String, Value)>,
    /// Rows or results flagged as not converged.
    pub nonconverged: usize,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `manifest.cfg`, every table as `<name>.csv` and every document
    /// as `<name>.json` under `dir`. Returns the written paths.
    pub fn write(&self, dir: &Path, manifest: &str, hash: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("manifest.cfg");
        fs::write(&path, format!("{}\n{manifest}", header_comment(hash)))?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv(hash)?)?;
            written.push(path);
        }
        for (name, doc) in &self.documents {
            let mut doc = doc.clone();
            if let Value::Object(m) = &mut doc {
                m.insert("version".into(), Value::String(VERSION.into()));
                m.insert("config_hash".into(), Value::String(hash.into()));
            }
            let path = dir.join(format!("{name}.json"));
            fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            written.push(path);
        }
        Ok(written)
    }
}
