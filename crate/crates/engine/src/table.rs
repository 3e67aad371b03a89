//! Labelled numeric tables with CSV output.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    /// Rendered as an empty field, for values that do not exist on a row
    /// (for example the utility of an infeasible configuration).
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Num(if v { 1.0 } else { 0.0 })
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A rectangular table of finite values with provenance lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    name: String,
    headers: Vec<String>,
    rows: Vec<Vec<Cell>>,
    provenance: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    /// Numeric column by header; non-numeric cells become `None`.
    pub fn column(&self, header: &str) -> Option<Vec<Option<f64>>> {
        let j = self.headers.iter().position(|h| h == header)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[j] {
                    Cell::Num(v) => Some(v),
                    _ => None,
                })
                .collect(),
        )
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::Invalid(format!(
                "table {}: row has {} cells, expected {}",
                self.name,
                row.len(),
                self.headers.len()
            )));
        }
        if let Some(bad) = row.iter().find(|c| matches!(c, Cell::Num(v) if !v.is_finite())) {
            return Err(Error::Invalid(format!("table {}: non-finite value {bad:?}", self.name)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_nums(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|&v| Cell::Num(v)).collect())
    }

    pub fn add_provenance(&mut self, key: &str, value: &str) {
        self.provenance.push((key.to_string(), value.to_string()));
    }

    /// CSV text: `#` provenance lines, the header, then rows. Numbers use
    /// the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_num(*v),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal form of a finite float.
pub fn format_num(v: f64) -> String {
    if v == 0.0 {
        // drop the sign of negative zero
        return "0".to_string();
    }
    format!("{v}")
}
