//! Executions, labels and datasets shared by every other module.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Application name plus input size, rendered as `app_INPUT`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AppLabel {
    application_name: String,
    input_size: String,
}

impl AppLabel {
    pub fn new(application_name: impl Into<String>, input_size: impl Into<String>) -> Result<Self> {
        let application_name = application_name.into();
        let input_size = input_size.into();
        let bad = |s: &str| s.is_empty() || s.chars().any(char::is_whitespace) || s.contains(',');
        if bad(&application_name) || bad(&input_size) || input_size.contains('_') {
            return Err(Error::InvalidLabel(format!("{application_name}_{input_size}")));
        }
        Ok(AppLabel {
            application_name,
            input_size,
        })
    }

    pub fn application_name(&self) -> &str {
        &self.application_name
    }

    pub fn input_size(&self) -> &str {
        &self.input_size
    }
}

/// Splits on the last underscore, so `"miniAMR_Z"` is `{miniAMR, Z}`.
pub fn parse_app_label(s: &str) -> Result<AppLabel> {
    let (app, input) = s.rsplit_once('_').ok_or_else(|| Error::InvalidLabel(s.to_string()))?;
    AppLabel::new(app, input).map_err(|_| Error::InvalidLabel(s.to_string()))
}

impl FromStr for AppLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_app_label(s)
    }
}

impl fmt::Display for AppLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.application_name, self.input_size)
    }
}

/// One node's samples of one metric, as `(seconds since start, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeries {
    metric_name: String,
    node_index: usize,
    samples: Vec<(f64, f64)>,
}

impl NodeSeries {
    /// Timestamps must be finite and strictly increasing.
    pub fn new(metric_name: impl Into<String>, node_index: usize, samples: Vec<(f64, f64)>) -> Result<Self> {
        let metric_name = metric_name.into();
        if metric_name.is_empty() {
            return Err(Error::InvalidSeries {
                metric: metric_name,
                node: node_index,
                reason: "empty metric name".into(),
            });
        }
        for (i, &(t, _)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidSeries {
                    metric: metric_name,
                    node: node_index,
                    reason: format!("non-finite timestamp at sample {i}"),
                });
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::InvalidSeries {
                    metric: metric_name,
                    node: node_index,
                    reason: format!("timestamp {t} at sample {i} is not strictly increasing"),
                });
            }
        }
        Ok(NodeSeries {
            metric_name,
            node_index,
            samples,
        })
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn node_index(&self) -> usize {
        self.node_index
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn first_timestamp(&self) -> Option<f64> {
        self.samples.first().map(|s| s.0)
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.samples.last().map(|s| s.0)
    }

    fn shift(&mut self, offset: f64) {
        for s in &mut self.samples {
            s.0 -= offset;
        }
    }
}

/// One job run: per-node, per-metric series plus an optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    execution_id: String,
    label: Option<AppLabel>,
    node_count: usize,
    series: BTreeMap<(String, usize), NodeSeries>,
}

impl Execution {
    pub fn new(execution_id: impl Into<String>, label: Option<AppLabel>, node_count: usize) -> Result<Self> {
        let execution_id = execution_id.into();
        if execution_id.is_empty() {
            return Err(Error::InvalidExecution {
                execution_id,
                reason: "empty execution id".into(),
            });
        }
        if node_count == 0 {
            return Err(Error::InvalidExecution {
                execution_id,
                reason: "node_count must be at least 1".into(),
            });
        }
        Ok(Execution {
            execution_id,
            label,
            node_count,
            series: BTreeMap::new(),
        })
    }

    pub fn add_series(&mut self, series: NodeSeries) -> Result<()> {
        if series.node_index >= self.node_count {
            return Err(Error::NodeOutOfRange {
                execution_id: self.execution_id.clone(),
                node: series.node_index,
                node_count: self.node_count,
            });
        }
        let key = (series.metric_name.clone(), series.node_index);
        if self.series.contains_key(&key) {
            return Err(Error::DuplicateSeries {
                execution_id: self.execution_id.clone(),
                metric: key.0,
                node: key.1,
            });
        }
        self.series.insert(key, series);
        Ok(())
    }

    pub fn with_series(mut self, series: impl IntoIterator<Item = NodeSeries>) -> Result<Self> {
        for s in series {
            self.add_series(s)?;
        }
        Ok(self)
    }

    pub fn execution_id(&self) -> &str {
        &self.execution_id
    }

    pub fn label(&self) -> Option<&AppLabel> {
        self.label.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn series(&self, metric: &str, node: usize) -> Option<&NodeSeries> {
        self.series.get(&(metric.to_string(), node))
    }

    pub fn all_series(&self) -> impl Iterator<Item = &NodeSeries> {
        self.series.values()
    }

    pub fn has_metric(&self, metric: &str) -> bool {
        self.series.keys().any(|(m, _)| m == metric)
    }

    pub fn metric_names(&self) -> BTreeSet<String> {
        self.series.keys().map(|(m, _)| m.clone()).collect()
    }

    /// Shifts every timestamp so the earliest sample across all series is at 0.
    pub fn normalize_timestamps(&mut self) {
        let start = self
            .series
            .values()
            .filter_map(NodeSeries::first_timestamp)
            .fold(f64::INFINITY, f64::min);
        if start.is_finite() && start != 0.0 {
            for s in self.series.values_mut() {
                s.shift(start);
            }
        }
    }

    /// Drops every series whose metric is not in `keep`.
    pub fn retain_metrics(&mut self, keep: &BTreeSet<String>) {
        self.series.retain(|(m, _), _| keep.contains(m));
    }

    pub fn require_label(&self) -> Result<&AppLabel> {
        self.label
            .as_ref()
            .ok_or_else(|| Error::UnlabeledExecution(self.execution_id.clone()))
    }
}

/// An ordered collection of executions with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    executions: Vec<Execution>,
    metric_names: BTreeSet<String>,
}

impl Dataset {
    pub fn new(executions: Vec<Execution>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &executions {
            if !seen.insert(e.execution_id.as_str()) {
                return Err(Error::DuplicateExecution(e.execution_id.clone()));
            }
        }
        let metric_names = executions.iter().flat_map(Execution::metric_names).collect();
        Ok(Dataset {
            executions,
            metric_names,
        })
    }

    pub fn executions(&self) -> &[Execution] {
        &self.executions
    }

    pub fn metric_names(&self) -> &BTreeSet<String> {
        &self.metric_names
    }

    pub fn len(&self) -> usize {
        self.executions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.executions.is_empty()
    }

    pub fn get(&self, execution_id: &str) -> Option<&Execution> {
        self.executions.iter().find(|e| e.execution_id == execution_id)
    }

    /// Labels of all executions, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<&AppLabel>> {
        self.executions.iter().map(Execution::require_label).collect()
    }

    /// Application names in order of first appearance.
    pub fn application_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.executions.iter().filter_map(Execution::label) {
            if !out.iter().any(|a| a == l.application_name()) {
                out.push(l.application_name().to_string());
            }
        }
        out
    }

    /// Input sizes in order of first appearance.
    pub fn input_sizes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in self.executions.iter().filter_map(Execution::label) {
            if !out.iter().any(|s| s == l.input_size()) {
                out.push(l.input_size().to_string());
            }
        }
        out
    }

    /// Executions at the given positions, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let executions: Vec<Execution> = indices.iter().map(|&i| self.executions[i].clone()).collect();
        let metric_names = executions.iter().flat_map(Execution::metric_names).collect();
        Dataset {
            executions,
            metric_names,
        }
    }

    pub fn into_executions(self) -> Vec<Execution> {
        self.executions
    }
}

/// Splits a labeled dataset into executions whose label satisfies `predicate`
/// (`removed`) and the rest (`kept`). Order is preserved on both sides.
pub fn dataset_partition<F>(d: &Dataset, predicate: F) -> Result<(Dataset, Dataset)>
where
    F: Fn(&AppLabel) -> bool,
{
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, e) in d.executions.iter().enumerate() {
        if predicate(e.require_label()?) {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    Ok((d.select(&kept), d.select(&removed)))
}
