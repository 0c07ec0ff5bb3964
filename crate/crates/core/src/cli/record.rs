//! Result records and the files written next to them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;

/// One measured quantity with its acceptance window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Metric {
    pub fn within(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.into(), value, lower, upper, pass }
    }

    /// A value recorded without a window.
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, lower: None, upper: None, pass: true }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, lower: Some(1.0), upper: None, pass: ok }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    /// SHA-256 of the canonical JSON of every parameter that fed the run.
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub runtime_secs: f64,
}

impl ResultRecord {
    pub fn new(experiment: impl Into<String>, config: &serde_json::Value, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash: config_hash(config),
            seed,
            metrics: Vec::new(),
            pass: true,
            notes: Vec::new(),
            runtime_secs: 0.0,
        }
    }

    pub fn push(&mut self, m: Metric) {
        self.pass &= m.pass;
        self.metrics.push(m);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Pretty JSON without the runtime, for determinism comparisons.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.runtime_secs = 0.0;
        serde_json::to_string_pretty(&r).expect("records serialize")
    }

    /// One line: `PASS|FAIL experiment metric=value [lo, hi] ...`.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.experiment);
        for m in &self.metrics {
            let lo = m.lower.map_or(String::new(), short);
            let hi = m.upper.map_or(String::new(), short);
            let window = if lo.is_empty() && hi.is_empty() { String::new() } else { format!(" [{lo}, {hi}]") };
            s.push_str(&format!(" {}={}{}{}", m.name, short(m.value), window, if m.pass { "" } else { "!" }));
        }
        s
    }
}

fn short(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

/// Hex SHA-256 of the compact JSON of `v`. Object keys are sorted by
/// `serde_json`, so equal configurations hash equally.
pub fn config_hash(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("values serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// A named file produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self { name: name.into(), contents: contents.into() }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        Self::new(name, serde_json::to_string_pretty(value).expect("values serialize"))
    }

    /// One compact JSON document per line.
    pub fn jsonl<T: Serialize>(name: impl Into<String>, items: impl IntoIterator<Item = T>) -> Self {
        let mut s = String::new();
        for it in items {
            s.push_str(&serde_json::to_string(&it).expect("values serialize"));
            s.push('\n');
        }
        Self::new(name, s)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ResultRecord,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    /// Writes `record.json` and every artifact into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("record.json");
        let body = serde_json::to_string_pretty(&self.record).expect("records serialize");
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// CSV text from a header and rows.
pub fn csv_table<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(CliError::csv)?;
    for r in rows {
        w.serialize(r).map_err(CliError::csv)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Stage { stage: "csv".into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
