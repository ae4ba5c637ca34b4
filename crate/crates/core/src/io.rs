//! Plain-text and binary serialization helpers.
//!
//! Every float written to CSV uses 17 significant digits so that values
//! round-trip exactly.

use crate::error::{Error, Result};
use std::fmt::Write as _;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", v)
}

/// A small CSV table with `#`-prefixed metadata lines.
#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    /// Parses a table produced by [`CsvTable::render`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = CsvTable::default();
        let mut header_seen = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                table.comments.push(c.trim().to_string());
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            if !header_seen {
                table.columns = fields;
                header_seen = true;
            } else {
                if fields.len() != table.columns.len() {
                    return Err(Error::Parse(format!(
                        "row has {} fields, header has {}",
                        fields.len(),
                        table.columns.len()
                    )));
                }
                table.rows.push(fields);
            }
        }
        if !header_seen {
            return Err(Error::Parse("missing CSV header".into()));
        }
        Ok(table)
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("no column named {name}")))?;
        self.rows
            .iter()
            .map(|r| parse_f64(&r[idx]))
            .collect()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// Parses one value per line; blank lines and `#` comments are skipped.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse_f64)
        .collect()
}

/// Parses a comma separated list such as `100,200,400`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| Error::Parse(format!("{p:?}: {e}"))))
        .collect()
}
