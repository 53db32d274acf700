//! JSON documents and fixed-header CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub const SCHEMA: &str = "sicprop/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip form, switching to exponent notation for very
/// small or large magnitudes.
pub fn num(x: f64) -> String {
    let mut s = String::new();
    let plain = x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs());
    if plain {
        write!(s, "{x}").expect("string write");
    } else {
        write!(s, "{x:e}").expect("string write");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub command: &'static str,
    pub params: Map<String, Value>,
    pub result: Value,
    pub passed: bool,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn document(&self, cfg: &RunConfig, timestamp: Option<u64>) -> Value {
        let mut doc = json!({
            "schema": SCHEMA,
            "command": self.command,
            "seed": cfg.seed,
            "params": self.params,
            "result": self.result,
            "passed": self.passed,
        });
        if let Some(t) = timestamp {
            doc["timestamp"] = json!(t);
        }
        doc
    }

    /// Writes the requested files and returns their paths.
    pub fn write(&self, cfg: &RunConfig, doc: &Value) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(&cfg.out_dir)?;
        let mut written = Vec::new();
        if cfg.output.json() {
            let path = cfg.out_dir.join(format!("{}.json", self.command));
            fs::write(&path, format!("{}\n", serde_json::to_string_pretty(doc).expect("serializable")))?;
            written.push(path);
        }
        if cfg.output.csv() {
            if let Some(t) = &self.table {
                let path = cfg.out_dir.join(format!("{}.csv", self.command));
                fs::write(&path, t.render())?;
                written.push(path);
            }
        }
        Ok(written)
    }
}
