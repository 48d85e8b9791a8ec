//! Deterministic file writers. Every report is either a CSV table or a pretty
//! JSON document; floats use Rust's shortest round-trip formatting so repeated
//! runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use defirisk::{Error, Result};
use serde::Serialize;

use crate::config::OutputFormat;

/// A rectangular report that can be written as CSV or JSON records.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
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
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => s.clone().into(),
            // non-finite values have no JSON form
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Int(v) => (*v).into(),
            Cell::Bool(b) => (*b).into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let wrap = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e) };
    w.write_record(&table.header).map_err(wrap)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::to_csv)).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

fn table_json(table: &Table) -> serde_json::Value {
    let records = table
        .rows
        .iter()
        .map(|row| {
            let obj: serde_json::Map<String, serde_json::Value> =
                table.header.iter().zip(row).map(|(k, c)| ((*k).to_string(), c.to_json())).collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(records)
}

/// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json` and returns the path.
pub fn write_table(dir: &Path, stem: &str, format: OutputFormat, table: &Table) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            write_csv(&path, table)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            write_json(&path, &table_json(table))?;
            Ok(path)
        }
    }
}

/// Removes a stale file left by an earlier run, ignoring absence.
pub fn remove_stale(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::Io { path: path.to_path_buf(), source: e }),
    }
}
