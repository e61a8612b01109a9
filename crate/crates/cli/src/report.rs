//! JSON reports, CSV tables and regression baselines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const TOOL: &str = concat!("critlab ", env!("CARGO_PKG_VERSION"));
pub const BASELINE_FORMAT: u32 = 1;
/// Relative tolerance for a frozen constant to count as reproduced.
pub const REGRESSION_RTOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub kind: String,
    pub precision: String,
    pub seed: u64,
    pub config: Value,
    pub results: Value,
    /// Empirical constants standing in for existence constants.
    pub regressions: BTreeMap<String, f64>,
    pub hard_failures: Vec<String>,
    /// Failed numerical claims; only the acceptance runner gates on them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soft_failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Comparison>,
}

impl Report {
    pub fn failed(&self) -> bool {
        !self.hard_failures.is_empty()
            || !self.soft_failures.is_empty()
            || self.baseline.as_ref().is_some_and(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A CSV table with a fixed column contract.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }
}

/// Shortest round-trip representation, so CSV output is reproducible.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Artifacts {
    /// Writes `<stem>.json` and one `<stem>-<table>.csv` per table.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut out = Vec::new();
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.report.to_json()).map_err(|e| CliError::io(&json, e))?;
        out.push(json);
        for t in &self.tables {
            let p = dir.join(format!("{stem}-{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?).map_err(|e| CliError::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub format: u32,
    pub tool: String,
    pub kind: String,
    /// Constants frozen at one precision are gated only at that precision.
    pub precision: String,
    /// File name of the report the constants came from.
    pub source_report: String,
    pub config: Value,
    pub constants: BTreeMap<String, f64>,
}

impl Baseline {
    pub fn from_report(report: &Report, source: &str) -> Self {
        Baseline {
            format: BASELINE_FORMAT,
            tool: report.tool.clone(),
            kind: report.kind.clone(),
            precision: report.precision.clone(),
            source_report: source.to_string(),
            config: report.config.clone(),
            constants: report.regressions.clone(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let b: Baseline = serde_json::from_str(text).map_err(|e| CliError::json(path, e))?;
        if b.format != BASELINE_FORMAT {
            return Err(CliError::Config(format!(
                "{}: baseline format {} is not supported (expected {BASELINE_FORMAT})",
                path.display(),
                b.format
            )));
        }
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn compare(&self, current: &BTreeMap<String, f64>, precision: &str) -> Comparison {
        let same_precision = self.precision == precision;
        let mut entries = Vec::new();
        let mut missing = Vec::new();
        for (name, &b) in &self.constants {
            match current.get(name) {
                Some(&c) => {
                    let rel = rel_diff(c, b);
                    entries.push(DriftEntry {
                        name: name.clone(),
                        baseline: b,
                        current: c,
                        rel_diff: rel,
                        within: rel <= REGRESSION_RTOL,
                    });
                }
                None => missing.push(name.clone()),
            }
        }
        let clean = missing.is_empty() && entries.iter().all(|e| e.within);
        Comparison {
            baseline_precision: self.precision.clone(),
            precision: precision.to_string(),
            gated: same_precision,
            passed: clean || !same_precision,
            entries,
            missing,
        }
    }
}

pub fn rel_diff(current: f64, baseline: f64) -> f64 {
    if current == baseline {
        return 0.0;
    }
    (current - baseline).abs() / baseline.abs().max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub name: String,
    pub baseline: f64,
    pub current: f64,
    pub rel_diff: f64,
    pub within: bool,
}

/// Result of checking a run against a baseline. Across precisions this is
/// a drift report and never fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline_precision: String,
    pub precision: String,
    pub gated: bool,
    pub passed: bool,
    pub entries: Vec<DriftEntry>,
    pub missing: Vec<String>,
}

/// Default baseline path next to a report: `x.json` becomes `x.baseline.json`.
pub fn default_baseline_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.baseline.json"))
}

/// Extracts the regression constants of a clean report into a baseline file.
pub fn freeze_baseline(report_path: &Path, out: Option<&Path>, force: bool) -> Result<PathBuf> {
    let text = std::fs::read_to_string(report_path).map_err(|e| CliError::io(report_path, e))?;
    let report: Report = serde_json::from_str(&text).map_err(|e| CliError::json(report_path, e))?;
    if !report.hard_failures.is_empty() {
        return Err(CliError::DirtyReport(report_path.to_path_buf()));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| default_baseline_path(report_path));
    if out.exists() && !force {
        return Err(CliError::WouldOverwrite(out));
    }
    let source = report_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let baseline = Baseline::from_report(&report, &source);
    let mut body = serde_json::to_string_pretty(&baseline).expect("baseline serializes");
    body.push('\n');
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(&out, body).map_err(|e| CliError::io(&out, e))?;
    Ok(out)
}
