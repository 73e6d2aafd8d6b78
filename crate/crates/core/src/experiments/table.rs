//! Result tables and their CSV form.
//!
//! Metadata lines start with `#! ` and hold the canonical configuration, so
//! a table file can be fed back to [`spec_from_csv`] to rerun the sweep.

use serde::{Deserialize, Serialize};

use super::config::{parse_config, ExperimentSpec};
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Cell {
    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(v) => v as f64,
            Cell::Real(v) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) if v.is_nan() => "nan".into(),
            Cell::Real(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Real(v) => format!("{v:.16e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub spec: ExperimentSpec,
}

impl ResultTable {
    pub fn new(columns: Vec<String>, spec: ExperimentSpec) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            spec,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width differs from header"
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("#! version = {}\n", env!("CARGO_PKG_VERSION"));
        for line in self.spec.to_config_text().lines() {
            out.push_str("#! ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Recovers the configuration embedded in a CSV written by [`ResultTable::to_csv`].
pub fn spec_from_csv(csv: &str) -> Result<ExperimentSpec, ExperimentError> {
    let config: String = csv
        .lines()
        .filter_map(|l| l.strip_prefix("#! "))
        .map(|l| format!("{l}\n"))
        .collect();
    if config.is_empty() {
        return Err(ExperimentError::Invalid(
            "no `#!` metadata lines found".into(),
        ));
    }
    parse_config(&config, None)
}
