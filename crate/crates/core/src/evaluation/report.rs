//! Tabular reports and their tsv / json renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const DAGGER: &str = "\u{2020}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Rendered x100 with one decimal in tsv.
    Proportion,
    Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub denominator: usize,
    pub kind: CellKind,
    /// `Some(true)` when the difference from the reference is not
    /// significant; `None` when the cell was not compared.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dagger: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
}

impl Cell {
    pub fn proportion(value: f64, denominator: usize) -> Self {
        Self {
            value,
            denominator,
            kind: CellKind::Proportion,
            dagger: None,
            p_value: None,
        }
    }

    pub fn number(value: f64) -> Self {
        Self {
            value,
            denominator: 0,
            kind: CellKind::Number,
            dagger: None,
            p_value: None,
        }
    }

    /// Mark against the reference: dagger when `p > threshold`.
    pub fn compared(mut self, p: f64, threshold: f64) -> Self {
        self.dagger = Some(p > threshold);
        self.p_value = Some(p);
        self
    }

    fn render(&self) -> String {
        match self.kind {
            CellKind::Proportion => format!("{:.1}", self.value * 100.0),
            CellKind::Number => format!("{}", self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub title: String,
    pub config: BTreeMap<String, String>,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub counts: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn new(title: impl Into<String>, row_header: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            title: title.into(),
            row_header: row_header.into(),
            columns,
            ..Self::default()
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, cells: Vec<Option<Cell>>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(ReportRow {
            label: label.into(),
            cells,
        });
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&Cell> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.label == row)?.cells[c].as_ref()
    }

    /// Checks every proportion lies in [0, 1].
    pub fn validate(&self) -> Result<(), String> {
        for row in &self.rows {
            for (col, cell) in self.columns.iter().zip(&row.cells) {
                if let Some(c) = cell {
                    if c.kind == CellKind::Proportion && !(0.0..=1.0).contains(&c.value) {
                        return Err(format!("{}/{col}: proportion {} outside [0, 1]", row.label, c.value));
                    }
                }
            }
        }
        Ok(())
    }

    fn compared_columns(&self) -> Vec<bool> {
        (0..self.columns.len())
            .map(|c| {
                self.rows
                    .iter()
                    .any(|r| r.cells[c].as_ref().is_some_and(|x| x.dagger.is_some()))
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let compared = self.compared_columns();
        let mut out = String::new();
        out.push_str(&self.row_header);
        for (col, &cmp) in self.columns.iter().zip(&compared) {
            let _ = write!(out, "\t{col}");
            if cmp {
                let _ = write!(out, "\t{col}{DAGGER}");
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            for (cell, &cmp) in row.cells.iter().zip(&compared) {
                out.push('\t');
                if let Some(c) = cell {
                    out.push_str(&c.render());
                }
                if cmp {
                    out.push('\t');
                    if cell.as_ref().and_then(|c| c.dagger) == Some(true) {
                        out.push_str(DAGGER);
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Tsv => "tsv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => report.to_json(),
    }
}

/// Write `report` to `path`.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: &Path) -> io::Result<()> {
    fs::write(path, render_report(report, format))
}
