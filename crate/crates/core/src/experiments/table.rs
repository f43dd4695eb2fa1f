use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Float(f64),
    Flag(bool),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            // 17 significant digits round-trip every f64
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(v) => v.to_string(),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

/// Everything written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub experiment: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub provenance: String,
    /// Sizes of the swept dimensions; their product is the row count.
    pub sweep: Vec<(String, usize)>,
    /// Units and meaning of the theory columns.
    pub columns: serde_json::Value,
    pub summary: serde_json::Value,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub schema: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Metadata,
}

impl ExperimentResult {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no column named {name}")))
    }

    /// Numeric column; non-numeric cells become NaN.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn texts(&self, name: &str) -> Result<Vec<String>> {
        let k = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[k].render()).collect())
    }

    /// Numeric column restricted to rows where `key` renders as `value`.
    pub fn floats_where(&self, name: &str, key: &str, value: &str) -> Result<Vec<f64>> {
        let keys = self.texts(key)?;
        Ok(self.floats(name)?.into_iter().zip(keys).filter(|(_, k)| k == value).map(|(v, _)| v).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.schema)?;
        for row in &self.rows {
            if row.len() != self.schema.len() {
                return Err(Error::Dimension(format!("row has {} fields, schema {}", row.len(), self.schema.len())));
            }
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metadata)?)
    }
}
