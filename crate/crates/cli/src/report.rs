//! CSV tables and the JSON run summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Fixed scientific format with 12 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Rounds to the 12 significant digits shown in the tables.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        num(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub criterion: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub model: String,
    pub zone_constant: Option<f64>,
    pub k: Option<usize>,
    pub rows: usize,
    pub verdicts: Vec<Verdict>,
    pub metrics: BTreeMap<String, serde_json::Value>,
}

impl Summary {
    pub fn new(command: &'static str, model: String) -> Self {
        Self { command, model, zone_constant: None, k: None, rows: 0, verdicts: Vec::new(), metrics: BTreeMap::new() }
    }

    pub fn verdict(&mut self, criterion: u32, name: &'static str, pass: bool, detail: String) {
        self.verdicts.push(Verdict { criterion, name, pass, detail });
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        let v = serde_json::Number::from_f64(round12(value)).map_or(serde_json::Value::Null, serde_json::Value::Number);
        self.metrics.insert(key.to_string(), v);
    }

    pub fn flag(&mut self, key: &str, value: bool) {
        self.metrics.insert(key.to_string(), serde_json::Value::Bool(value));
    }

    pub fn list(&mut self, key: &str, values: &[f64]) {
        let v = values
            .iter()
            .map(|&x| serde_json::Number::from_f64(round12(x)).map_or(serde_json::Value::Null, serde_json::Value::Number))
            .collect();
        self.metrics.insert(key.to_string(), serde_json::Value::Array(v));
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
