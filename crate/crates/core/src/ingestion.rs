//! Native on-disk layout: a manifest plus one CSV file per execution node.
//!
//! Manifest (`manifest.csv`):
//!
//! ```text
//! # efd-manifest v1
//! execution_id,application_name,input_size,node_count,path_glob
//! ft_X_r000,ft,X,4,ft_X_r000/node*.csv
//! ```
//!
//! `path_glob` is relative to the manifest's directory. Blank application
//! and input columns mark an unlabeled execution. Matched files are sorted
//! by name and numbered from node 0.
//!
//! Series file:
//!
//! ```text
//! # efd-series v1
//! timestamp,nr_mapped_vmstat,Active_meminfo
//! 1500000000,6021,1.5e6
//! ```
//!
//! Blank cells are missing samples. Timestamps are shifted so that each
//! execution starts at 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Interval;
use crate::model::{AppLabel, Dataset, Execution, NodeSeries};

pub const MANIFEST_VERSION: &str = "# efd-manifest v1";
pub const SERIES_VERSION: &str = "# efd-series v1";
pub const MANIFEST_COLUMNS: [&str; 5] = [
    "execution_id",
    "application_name",
    "input_size",
    "node_count",
    "path_glob",
];
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub execution_id: String,
    pub label: Option<AppLabel>,
    pub node_count: usize,
    pub path_glob: String,
    /// Line in the manifest file, for error reporting.
    #[serde(skip)]
    pub line: usize,
}

fn check_version(path: &Path, text: &str, expected: &str) -> Result<()> {
    match text.lines().next() {
        Some(first) if first.trim_end() == expected => Ok(()),
        first => Err(Error::ingest(
            path,
            Some(1),
            format!("expected version line {expected:?}, found {:?}", first.unwrap_or("")),
        )),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord) -> Option<usize> {
    rec.position().map(|p| p.line() as usize)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingest(path, None, e.to_string()))?;
    check_version(path, &text, MANIFEST_VERSION)?;
    let mut rdr = csv_reader(&text);
    let headers = rdr.headers().map_err(|e| Error::ingest(path, None, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != MANIFEST_COLUMNS {
        return Err(Error::ingest(
            path,
            None,
            format!("expected columns {}", MANIFEST_COLUMNS.join(",")),
        ));
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::ingest(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec).unwrap_or(0);
        let bad = |reason: String| Error::ingest(path, Some(line), reason);
        let execution_id = rec[0].to_string();
        if execution_id.is_empty() {
            return Err(bad("empty execution_id".into()));
        }
        let label = match (&rec[1], &rec[2]) {
            ("", "") => None,
            (app, input) => Some(AppLabel::new(app, input).map_err(|e| bad(e.to_string()))?),
        };
        let node_count: usize = rec[3]
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| bad(format!("invalid node_count {:?}", &rec[3])))?;
        if rec[4].is_empty() {
            return Err(bad("empty path_glob".into()));
        }
        entries.push(ManifestEntry {
            execution_id,
            label,
            node_count,
            path_glob: rec[4].to_string(),
            line,
        });
    }
    Ok(entries)
}

/// Samples per metric column of one node file.
fn read_series_file(
    path: &Path,
    metric_filter: Option<&BTreeSet<String>>,
) -> Result<BTreeMap<String, Vec<(f64, f64)>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingest(path, None, e.to_string()))?;
    check_version(path, &text, SERIES_VERSION)?;
    let mut rdr = csv_reader(&text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::ingest(path, None, e.to_string()))?
        .clone();
    if headers.get(0) != Some("timestamp") {
        return Err(Error::ingest(path, None, "first column must be \"timestamp\""));
    }
    let mut seen = BTreeSet::new();
    for h in headers.iter().skip(1) {
        if h.is_empty() || !seen.insert(h) {
            return Err(Error::ingest(
                path,
                None,
                format!("empty or duplicate metric column {h:?}"),
            ));
        }
    }
    let columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, h)| metric_filter.is_none_or(|f| f.contains(*h)))
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = columns.iter().map(|(_, m)| (m.clone(), Vec::new())).collect();
    let mut last_t = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::ingest(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        let number = |cell: &str| -> Result<f64> {
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ingest(path, line, format!("unparsable numeric cell {cell:?}")))
        };
        let t = number(&rec[0])?;
        if t <= last_t {
            return Err(Error::ingest(
                path,
                line,
                format!("timestamp {t} is not strictly increasing"),
            ));
        }
        last_t = t;
        for (i, m) in &columns {
            let cell = &rec[*i];
            if !cell.is_empty() {
                out.get_mut(m).expect("column").push((t, number(cell)?));
            }
        }
    }
    Ok(out)
}

fn load_execution(
    base: &Path,
    entry: &ManifestEntry,
    manifest: &Path,
    metric_filter: Option<&BTreeSet<String>>,
) -> Result<Execution> {
    let pattern = base.join(&entry.path_glob);
    let pattern = pattern.to_string_lossy();
    let bad = |reason: String| Error::ingest(manifest, Some(entry.line), reason);
    let mut files: Vec<PathBuf> = glob::glob(&pattern)
        .map_err(|e| bad(format!("invalid path_glob: {e}")))?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    files.retain(|p| p.is_file());
    files.sort();
    if files.len() != entry.node_count {
        return Err(bad(format!(
            "{}: node_count is {} but {} node file(s) match {}",
            entry.execution_id,
            entry.node_count,
            files.len(),
            entry.path_glob
        )));
    }
    let mut exec = Execution::new(&entry.execution_id, entry.label.clone(), entry.node_count)?;
    for (node, file) in files.iter().enumerate() {
        for (metric, samples) in read_series_file(file, metric_filter)? {
            let series =
                NodeSeries::new(metric, node, samples).map_err(|e| Error::ingest(file, None, e.to_string()))?;
            exec.add_series(series)?;
        }
    }
    exec.normalize_timestamps();
    Ok(exec)
}

/// Loads every execution listed in the manifest, in manifest order.
///
/// With `metric_filter`, only the named metric columns are kept.
pub fn load_dataset(manifest_path: impl AsRef<Path>, metric_filter: Option<&BTreeSet<String>>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let entries = read_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(Error::ingest(manifest_path, None, "manifest lists no executions"));
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let executions: Vec<Execution> = entries
        .par_iter()
        .map(|e| load_execution(base, e, manifest_path, metric_filter))
        .collect::<Result<_>>()?;
    Dataset::new(executions)
}

fn check_path_component(id: &str) -> Result<()> {
    let unsafe_id = id.is_empty()
        || id == "."
        || id == ".."
        || id.starts_with('#')
        || id
            .chars()
            .any(|c| matches!(c, '/' | '\\' | ',' | '*' | '?' | '[' | ']') || c.is_control());
    if unsafe_id {
        return Err(Error::InvalidExecution {
            execution_id: id.to_string(),
            reason: "id cannot be used as a directory name".into(),
        });
    }
    Ok(())
}

fn node_file_name(node: usize, node_count: usize) -> String {
    let width = (node_count.saturating_sub(1)).to_string().len().max(3);
    format!("node{node:0width$}.csv")
}

/// Writes `d` in the native layout under `dir` and returns the manifest path.
pub fn write_native(d: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = BufWriter::new(fs::File::create(&manifest_path)?);
    writeln!(manifest, "{MANIFEST_VERSION}")?;
    writeln!(manifest, "{}", MANIFEST_COLUMNS.join(","))?;
    for e in d.executions() {
        check_path_component(e.execution_id())?;
        let (app, input) = e.label().map_or(("", ""), |l| (l.application_name(), l.input_size()));
        writeln!(
            manifest,
            "{},{app},{input},{},{}/node*.csv",
            e.execution_id(),
            e.node_count(),
            e.execution_id()
        )?;
        let exec_dir = dir.join(e.execution_id());
        fs::create_dir_all(&exec_dir)?;
        for node in 0..e.node_count() {
            let path = exec_dir.join(node_file_name(node, e.node_count()));
            write_node_file(e, node, BufWriter::new(fs::File::create(path)?))?;
        }
    }
    manifest.flush()?;
    Ok(manifest_path)
}

fn write_node_file<W: Write>(e: &Execution, node: usize, mut out: W) -> Result<()> {
    let series: Vec<&NodeSeries> = e.all_series().filter(|s| s.node_index() == node).collect();
    writeln!(out, "{SERIES_VERSION}")?;
    write!(out, "timestamp")?;
    for s in &series {
        write!(out, ",{}", s.metric_name())?;
    }
    writeln!(out)?;
    let mut times: Vec<f64> = series.iter().flat_map(|s| s.samples().iter().map(|p| p.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cursors = vec![0usize; series.len()];
    for t in times {
        write!(out, "{t}")?;
        for (s, c) in series.iter().zip(cursors.iter_mut()) {
            out.write_all(b",")?;
            if let Some(&(st, v)) = s.samples().get(*c) {
                if st == t {
                    write!(out, "{v}")?;
                    *c += 1;
                }
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageProblem {
    /// The node has no series for the metric.
    MissingSeries,
    /// No sample falls inside the window.
    NoSamplesInWindow,
    /// Samples exist in the window but the series starts late or ends early.
    PartialWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageIssue {
    pub execution_id: String,
    pub node_index: usize,
    pub metric: String,
    pub problem: CoverageProblem,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub interval: Option<Interval>,
    pub issues: Vec<CoverageIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Lists every (execution, node, metric) whose data does not cover `iv`.
/// Assumes one sample per second for the end-of-window check.
pub fn validate_dataset(d: &Dataset, iv: Interval) -> ValidationReport {
    let mut issues = Vec::new();
    for e in d.executions() {
        for metric in d.metric_names() {
            for node in 0..e.node_count() {
                let problem = match e.series(metric, node) {
                    None => Some(CoverageProblem::MissingSeries),
                    Some(s) => {
                        let in_window = s.samples().iter().any(|(t, _)| iv.contains(*t));
                        let first = s.first_timestamp().unwrap_or(f64::INFINITY);
                        let last = s.last_timestamp().unwrap_or(f64::NEG_INFINITY);
                        if !in_window {
                            Some(CoverageProblem::NoSamplesInWindow)
                        } else if first > iv.start_s() as f64 || last < iv.end_s() as f64 - 1.0 {
                            Some(CoverageProblem::PartialWindow)
                        } else {
                            None
                        }
                    }
                };
                if let Some(problem) = problem {
                    issues.push(CoverageIssue {
                        execution_id: e.execution_id().to_string(),
                        node_index: node,
                        metric: metric.clone(),
                        problem,
                    });
                }
            }
        }
    }
    ValidationReport {
        interval: Some(iv),
        issues,
    }
}
