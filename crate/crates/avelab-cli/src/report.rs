//! Experiment reports and their serialized forms.
//!
//! A report is a flat list of metric rows — each either informational or
//! checked against a [`targets`](crate::targets) entry — plus optional
//! mixing curves for plotting. Three output formats share one source of
//! truth:
//!
//! * **json** — the canonical nested form, two-space indented, one file per
//!   experiment (`<name>.json`) and a consolidated `summary.json`;
//! * **csv** — `summary.csv`, one row per metric with the check, both
//!   sides of the comparison, tolerance, provenance, and margin flattened
//!   into columns (header-only when there are no metrics);
//! * **plot-data** — `<name>.plot.csv` with one `(t, d)` column group per
//!   curve, rows padded on the right when curves have different lengths.
//!
//! Emission is byte-stable: field order is fixed by declaration, floats are
//! printed in shortest round-trip form, and wall-clock time is deliberately
//! kept out of the serialized bytes (the runner prints it to the console).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::targets::{self, Check};
use crate::{CliError, Result};

/// Schema version stamped into every report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// File stems in the output directory that are not experiment reports.
const RESERVED_STEMS: &[&str] = &["summary", "coverage"];

/// One measured value, optionally compared against a target.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    /// Comparison operator (`eq`, `ge`, `le`, `sign+`, `sign-`); absent for
    /// informational rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    /// Expected value or bound, per `check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    /// Leftover slack; negative exactly when the row failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// A worst-case distance profile `t ↦ d(t)` for one chain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    /// Which distance: `d1`, `d2`, or `dinf`.
    pub norm: String,
    pub t: Vec<u64>,
    pub d: Vec<f64>,
}

/// The result of one experiment run. Serialization round-trips losslessly;
/// `wall_seconds` is console-only by design so the bytes depend on nothing
/// but the config and seeds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    /// `"pass"` or `"fail"`.
    pub status: String,
    /// Echo of the inputs that produced this report (parameter grids for
    /// registry experiments, the filled config for config-driven runs).
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// One line per violated check, naming the tolerance and both sides.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    pub metrics: Vec<MetricRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<Curve>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }
}

/// Accumulates rows and failures while an experiment runs.
pub struct ReportBuilder {
    name: String,
    seed: u64,
    config: serde_json::Value,
    notes: Vec<String>,
    failures: Vec<String>,
    metrics: Vec<MetricRow>,
    curves: Vec<Curve>,
    started: std::time::Instant,
}

impl ReportBuilder {
    pub fn new(name: &str, seed: u64, config: serde_json::Value) -> Self {
        ReportBuilder {
            name: name.to_owned(),
            seed,
            config,
            notes: Vec::new(),
            failures: Vec::new(),
            metrics: Vec::new(),
            curves: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records a value with no check attached.
    pub fn info(&mut self, metric: &str, value: f64) {
        self.metrics.push(MetricRow {
            metric: metric.to_owned(),
            value,
            check: None,
            expected: None,
            tolerance: None,
            provenance: None,
            pass: None,
            margin: None,
        });
    }

    /// Checks `value` against the static table entry for `key`.
    ///
    /// # Panics
    /// If `key` is missing from the table or carries no static check — both
    /// are programming errors in the experiment, not data-dependent states.
    pub fn check(&mut self, key: &str, value: f64) {
        let spec = targets::spec(key);
        let check = spec
            .check
            .unwrap_or_else(|| panic!("target `{key}` has a runtime bound; use check_with"));
        self.push_checked(key, value, check);
    }

    /// Checks `value` against a bound instantiated at runtime (the formula
    /// lives in the table entry's description). `key` must still name a
    /// table entry so provenance and coverage stay accounted for.
    pub fn check_with(&mut self, key: &str, value: f64, check: Check) {
        targets::spec(key);
        self.push_checked(key, value, check);
    }

    /// Same as [`check_with`](Self::check_with) but recorded under a
    /// suffixed metric name (one row per grid point of a runtime family).
    pub fn check_at(&mut self, key: &str, suffix: &str, value: f64, check: Check) {
        targets::spec(key);
        self.push_row(format!("{key}[{suffix}]"), key, value, check);
    }

    fn push_checked(&mut self, key: &str, value: f64, check: Check) {
        self.push_row(key.to_owned(), key, value, check);
    }

    fn push_row(&mut self, metric: String, key: &str, value: f64, check: Check) {
        let spec = targets::spec(key);
        let pass = check.pass(value);
        let margin = check.margin(value);
        if !pass {
            self.failures.push(format!(
                "`{metric}` = {value} violates {check} (margin {margin:e}); {}",
                spec.what
            ));
        }
        self.metrics.push(MetricRow {
            metric,
            value,
            check: Some(check.op().to_owned()),
            expected: Some(check.expected()),
            tolerance: Some(check.tolerance()),
            provenance: Some(spec.provenance.to_string()),
            pass: Some(pass),
            margin: Some(margin),
        });
    }

    pub fn curve(&mut self, label: &str, norm: &str, points: Vec<(u64, f64)>) {
        let (t, d) = points.into_iter().unzip();
        self.curves.push(Curve { label: label.to_owned(), norm: norm.to_owned(), t, d });
    }

    pub fn finish(self) -> ExperimentReport {
        let status = if self.failures.is_empty() { "pass" } else { "fail" };
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            name: self.name,
            seed: self.seed,
            status: status.to_owned(),
            config: self.config,
            notes: self.notes,
            failures: self.failures,
            metrics: self.metrics,
            curves: self.curves,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Canonical JSON bytes: two-space indentation, declaration field order,
/// shortest-round-trip floats, trailing newline. Non-finite values are
/// refused — JSON cannot represent them losslessly.
pub fn canonical_json(report: &ExperimentReport) -> Result<Vec<u8>> {
    for row in &report.metrics {
        let finite = row.value.is_finite()
            && row.expected.is_none_or(f64::is_finite)
            && row.tolerance.is_none_or(f64::is_finite)
            && row.margin.is_none_or(f64::is_finite);
        if !finite {
            return Err(CliError::Report {
                path: report.name.clone(),
                message: format!("metric `{}` holds a non-finite value", row.metric),
            });
        }
    }
    for curve in &report.curves {
        if curve.t.len() != curve.d.len() {
            return Err(CliError::Report {
                path: report.name.clone(),
                message: format!("curve `{}` has mismatched column lengths", curve.label),
            });
        }
        if curve.d.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Report {
                path: report.name.clone(),
                message: format!("curve `{}` holds a non-finite distance", curve.label),
            });
        }
    }
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| CliError::Report {
        path: report.name.clone(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Where `run` writes the report for `name`.
pub fn report_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// Writes the canonical JSON form, creating the directory if needed.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = report_path(dir, &report.name);
    let bytes = canonical_json(report)?;
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

/// Loads every experiment report in `dir`, sorted by name. Consolidated
/// artifacts (`summary.*`, `coverage.*`, `*.plot.csv`) are skipped; anything
/// else must parse strictly and match its file stem.
pub fn load_reports(dir: &Path) -> Result<Vec<ExperimentReport>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(format!("reading {}", dir.display()), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .filter(|p| {
            p.file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|stem| !RESERVED_STEMS.contains(&stem))
        })
        .collect();
    paths.sort();
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let report: ExperimentReport =
            serde_json::from_str(&text).map_err(|e| CliError::Report {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if report.name != stem {
            return Err(CliError::Report {
                path: path.display().to_string(),
                message: format!("file stem does not match report name `{}`", report.name),
            });
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Writes `summary.json`: the loaded reports as one canonical array.
pub fn emit_summary_json(dir: &Path, reports: &[ExperimentReport]) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut bytes = serde_json::to_vec_pretty(reports).map_err(|e| CliError::Report {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

fn csv_cell(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_owned()
    }
}

fn csv_opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `summary.csv`: one row per metric across all reports, in report
/// order. An empty metric set still produces the header line.
pub fn emit_csv(dir: &Path, reports: &[ExperimentReport]) -> Result<PathBuf> {
    let mut out =
        String::from("experiment,metric,value,check,expected,tolerance,provenance,pass,margin\n");
    for report in reports {
        for row in &report.metrics {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_cell(&report.name),
                csv_cell(&row.metric),
                row.value,
                row.check.as_deref().unwrap_or_default(),
                csv_opt_f64(row.expected),
                csv_opt_f64(row.tolerance),
                row.provenance.as_deref().unwrap_or_default(),
                row.pass.map(|p| p.to_string()).unwrap_or_default(),
                csv_opt_f64(row.margin),
            ));
        }
    }
    let path = dir.join("summary.csv");
    std::fs::write(&path, out)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

/// Writes `<name>.plot.csv` for a report with curves: one `(t, d)` column
/// group per curve, labeled `t[<label>]` / `<norm>[<label>]`, rows padded
/// with empty cells past the end of shorter curves. Returns `None` (and
/// writes nothing) when the report has no curves.
pub fn emit_plot_data(dir: &Path, report: &ExperimentReport) -> Result<Option<PathBuf>> {
    if report.curves.is_empty() {
        return Ok(None);
    }
    let header: Vec<String> = report
        .curves
        .iter()
        .flat_map(|c| {
            [
                csv_cell(&format!("t[{}]", c.label)),
                csv_cell(&format!("{}[{}]", c.norm, c.label)),
            ]
        })
        .collect();
    let rows = report.curves.iter().map(|c| c.t.len()).max().unwrap_or(0);
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let cells: Vec<String> = report
            .curves
            .iter()
            .flat_map(|c| {
                if i < c.t.len() {
                    [c.t[i].to_string(), c.d[i].to_string()]
                } else {
                    [String::new(), String::new()]
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let path = dir.join(format!("{}.plot.csv", report.name));
    std::fs::write(&path, out)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(Some(path))
}
