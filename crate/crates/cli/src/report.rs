//! Report primitives: pass/fail checks, CSV tables, JSON summaries.

use serde::{Deserialize, Serialize};

/// One acceptance-style check with its threshold, as run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `value <op> threshold` must hold; op is "<=" or ">=".
    pub op: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, op: "<=".into(), threshold, pass: value <= threshold }
    }

    pub fn ge(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, op: ">=".into(), threshold, pass: value >= threshold }
    }
}

/// A CSV table under construction; rows are written in a fixed order so
/// reruns are byte-identical.
pub struct Table {
    pub name: String,
    header: String,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &str) -> Self {
        Table { name: name.into(), header: header.to_string(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 32 + self.header.len() + 1);
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// Stable float formatting for CSV cells.
pub fn fmt(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:.12e}")
    }
}

/// Everything a scenario run produces.
pub struct Outcome {
    pub scenario: String,
    pub tables: Vec<Table>,
    /// Additional verbatim report files (name, contents).
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub extra: serde_json::Value,
    pub seeds: Vec<u64>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "scenario": self.scenario,
            "passed": self.passed(),
            "checks": self.checks,
            "details": self.extra,
        })
    }
}
