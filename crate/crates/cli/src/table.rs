//! Append-only result tables with a versioned CSV header.

use std::fmt::Write as _;
use std::path::Path;

use crate::Result;

pub const FORMAT_VERSION: &str = "ndecs-results-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        ResultTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row arity mismatch");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric view of one column (non-numeric cells become NaN).
    pub fn column_f64(&self, name: &str) -> Vec<f64> {
        let Some(idx) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| r[idx].parse::<f64>().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {FORMAT_VERSION} table={}", self.name).unwrap();
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }

    pub fn write_csv(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }

    /// Equality with some columns masked; reruns of a manifest reproduce
    /// every cell except wall-clock timings.
    pub fn equals_ignoring(&self, other: &ResultTable, masked: &[&str]) -> bool {
        if self.columns != other.columns || self.rows.len() != other.rows.len() {
            return false;
        }
        let masked_idx: Vec<usize> = masked
            .iter()
            .filter_map(|m| self.column_index(m))
            .collect();
        self.rows.iter().zip(&other.rows).all(|(a, b)| {
            a.iter()
                .zip(b)
                .enumerate()
                .all(|(i, (x, y))| masked_idx.contains(&i) || x == y)
        })
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.12e}")
    }
}
