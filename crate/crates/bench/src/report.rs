//! CSV tables and the JSON summary.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use ski_core::bounds::{BoundReport, Constants};

use crate::error::BenchError;
use crate::fit::RateFit;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Bool(bool),
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // 17 significant digits round-trip every f64.
            Value::Real(v) => write!(f, "{v:.16e}"),
            Value::Text(v) => f.write_str(v),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Where a measurement was taken.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellKey {
    pub d: usize,
    pub n: usize,
    pub m_per_dim: usize,
    pub m_unpadded: usize,
    pub m_total: usize,
    pub seed: u64,
    pub data: String,
}

impl CellKey {
    pub fn new(d: usize, n: usize, m_per_dim: usize, seed: u64, data: &str) -> Self {
        Self {
            d,
            n,
            m_per_dim,
            m_unpadded: m_per_dim.pow(d as u32),
            m_total: (m_per_dim + 5).pow(d as u32),
            seed,
            data: data.to_string(),
        }
    }

    pub const COLUMNS: [&'static str; 6] = ["d", "n", "m_unpadded", "m_total", "seed", "data"];

    pub fn values(&self) -> Vec<Value> {
        vec![
            self.d.into(),
            self.n.into(),
            self.m_unpadded.into(),
            self.m_total.into(),
            self.seed.into(),
            self.data.as_str().into(),
        ]
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={} m={} seed={} data={}", self.d, self.n, self.m_unpadded, self.seed, self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellBound {
    pub cell: CellKey,
    #[serde(flatten)]
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: RateFit,
    pub slope_window: [f64; 2],
    pub r_squared_min: Option<f64>,
    pub passed: bool,
}

impl NamedFit {
    pub fn new(name: impl Into<String>, fit: RateFit, slope_window: [f64; 2], r_squared_min: Option<f64>) -> Self {
        let passed = fit.slope >= slope_window[0]
            && fit.slope <= slope_window[1]
            && r_squared_min.is_none_or(|r| fit.r_squared >= r);
        Self { name: name.into(), fit, slope_window, r_squared_min, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExperimentOutput {
    pub name: String,
    #[serde(skip)]
    pub table: Table,
    pub reports: Vec<CellBound>,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    /// Recorded but not asserted.
    pub observations: Vec<Check>,
    pub series: BTreeMap<String, Vec<f64>>,
}

impl ExperimentOutput {
    pub fn new(name: &str, table: Table) -> Self {
        Self { name: name.to_string(), table, ..Default::default() }
    }

    pub fn failures(&self) -> Vec<String> {
        let reports = self
            .reports
            .iter()
            .filter(|r| !r.report.satisfied)
            .map(|r| {
                // Rows of W carry 4^d weights but the bounds use √L c^d for their norm.
                let hint = if r.cell.d > 1 { "; d > 1, so the row-norm factor may be too small" } else { "" };
                format!(
                    "{}: {} exceeded its bound at {} (measured {:e}, bound {:e}{hint})",
                    self.name, r.report.name, r.cell, r.report.measured, r.report.theoretical
                )
            });
        let fits = self.fits.iter().filter(|f| !f.passed).map(|f| {
            format!(
                "{}: fit {} slope {:.4} (r² {:.4}) outside [{}, {}]",
                self.name, f.name, f.fit.slope, f.fit.r_squared, f.slope_window[0], f.slope_window[1]
            )
        });
        let checks = self.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {} ({})", self.name, c.name, c.detail));
        reports.chain(fits).chain(checks).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Summary {
    pub passed: bool,
    pub failures: Vec<String>,
    /// Calibrated constants keyed by dimension.
    pub constants: BTreeMap<String, Constants>,
    pub experiments: Vec<ExperimentOutput>,
}

impl Summary {
    pub fn new(constants: BTreeMap<String, Constants>, experiments: Vec<ExperimentOutput>) -> Self {
        let failures: Vec<String> = experiments.iter().flat_map(ExperimentOutput::failures).collect();
        Self { passed: failures.is_empty(), failures, constants, experiments }
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentOutput> {
        self.experiments.iter().find(|e| e.name == name)
    }

    /// One CSV per experiment plus `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        for exp in &self.experiments {
            let path = dir.join(format!("{}.csv", exp.name));
            std::fs::write(&path, exp.table.to_csv()).map_err(|e| BenchError::io(&path, e))?;
        }
        let path = dir.join("summary.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| BenchError::io(&path, e))
    }
}
