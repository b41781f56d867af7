//! Window means and fingerprint keys.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, NodeSeries};
use crate::rounding::{CanonicalDecimal, RoundingDepth};

/// Half-open window `[start_s, end_s)` in seconds since execution start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Interval {
    start_s: u64,
    end_s: u64,
}

impl Interval {
    pub fn new(start_s: u64, end_s: u64) -> Result<Self> {
        if start_s >= end_s {
            return Err(Error::InvalidInterval(format!("[{start_s}:{end_s}]")));
        }
        Ok(Interval { start_s, end_s })
    }

    pub fn start_s(self) -> u64 {
        self.start_s
    }

    pub fn end_s(self) -> u64 {
        self.end_s
    }

    pub fn contains(self, t: f64) -> bool {
        t >= self.start_s as f64 && t < self.end_s as f64
    }
}

impl Default for Interval {
    /// `[60:120]`: skips the initialization phase, still early in the run.
    fn default() -> Self {
        Interval {
            start_s: 60,
            end_s: 120,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}:{}]", self.start_s, self.end_s)
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInterval(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let (a, b) = inner.split_once(':').ok_or_else(bad)?;
        let parse = |v: &str| -> Result<u64> {
            if v.is_empty() || !v.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            v.parse().map_err(|_| bad())
        };
        Interval::new(parse(a)?, parse(b)?).map_err(|_| bad())
    }
}

impl TryFrom<String> for Interval {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Interval> for String {
    fn from(iv: Interval) -> String {
        iv.to_string()
    }
}

/// Dictionary key: metric, node, window and rounded window mean.
///
/// Rendered as `metric|node|[start:end]|mean`, e.g.
/// `nr_mapped_vmstat|0|[60:120]|6000.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    metric_name: String,
    node_index: usize,
    interval: Interval,
    rounded_mean: CanonicalDecimal,
}

impl Fingerprint {
    pub fn new(
        metric_name: impl Into<String>,
        node_index: usize,
        interval: Interval,
        rounded_mean: CanonicalDecimal,
    ) -> Self {
        Fingerprint {
            metric_name: metric_name.into(),
            node_index,
            interval,
            rounded_mean,
        }
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn node_index(&self) -> usize {
        self.node_index
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn rounded_mean(&self) -> &CanonicalDecimal {
        &self.rounded_mean
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}",
            self.metric_name, self.node_index, self.interval, self.rounded_mean
        )
    }
}

impl FromStr for Fingerprint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidFingerprint(s.to_string());
        let mut parts = s.rsplitn(4, '|');
        let mean = parts.next().ok_or_else(bad)?;
        let interval = parts.next().ok_or_else(bad)?;
        let node = parts.next().ok_or_else(bad)?;
        let metric = parts.next().filter(|m| !m.is_empty()).ok_or_else(bad)?;
        if node.is_empty() || !node.bytes().all(|b| b.is_ascii_digit()) || (node.len() > 1 && node.starts_with('0')) {
            return Err(bad());
        }
        let fp = Fingerprint {
            metric_name: metric.to_string(),
            node_index: node.parse().map_err(|_| bad())?,
            interval: interval.parse().map_err(|_| bad())?,
            rounded_mean: mean.parse().map_err(|_| bad())?,
        };
        Ok(fp)
    }
}

/// Arithmetic mean of the samples whose timestamp lies in `iv`.
pub fn window_mean(series: &NodeSeries, iv: Interval) -> Result<f64> {
    let (sum, count) = series
        .samples()
        .iter()
        .filter(|(t, _)| iv.contains(*t))
        .fold((0.0, 0usize), |(s, n), &(_, v)| (s + v, n + 1));
    if count == 0 {
        return Err(Error::WindowDataMissing {
            metric: series.metric_name().to_string(),
            node: series.node_index(),
            interval: iv.to_string(),
        });
    }
    Ok(sum / count as f64)
}

pub fn make_fingerprint(series: &NodeSeries, iv: Interval, depth: RoundingDepth) -> Result<Fingerprint> {
    let mean = CanonicalDecimal::canonicalize(window_mean(series, iv)?)?;
    Ok(Fingerprint::new(
        series.metric_name(),
        series.node_index(),
        iv,
        mean.round(depth),
    ))
}

/// Window means of one metric for every node of every execution in a
/// dataset, computed once and rounded on demand.
///
/// Cross-validation rebuilds many dictionaries over the same executions;
/// this avoids recomputing the same means for each fold and depth.
#[derive(Debug, Clone)]
pub struct FingerprintTable {
    metric_name: String,
    interval: Interval,
    rows: Vec<TableRow>,
}

#[derive(Debug, Clone)]
struct TableRow {
    has_metric: bool,
    // Per node; `None` when the node lacks the metric or has no window data.
    means: Vec<Option<CanonicalDecimal>>,
}

impl FingerprintTable {
    pub fn new(dataset: &Dataset, metric_name: &str, interval: Interval) -> Result<Self> {
        let mut rows = Vec::with_capacity(dataset.len());
        for e in dataset.executions() {
            let mut means = Vec::with_capacity(e.node_count());
            let mut has_metric = false;
            for node in 0..e.node_count() {
                let mean = match e.series(metric_name, node) {
                    None => None,
                    Some(s) => {
                        has_metric = true;
                        match window_mean(s, interval) {
                            Ok(m) => Some(CanonicalDecimal::canonicalize(m)?),
                            Err(Error::WindowDataMissing { .. }) => None,
                            Err(other) => return Err(other),
                        }
                    }
                };
                means.push(mean);
            }
            rows.push(TableRow { has_metric, means });
        }
        Ok(FingerprintTable {
            metric_name: metric_name.to_string(),
            interval,
            rows,
        })
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Whether execution `row` has the metric on any node.
    pub fn has_metric(&self, row: usize) -> bool {
        self.rows[row].has_metric
    }

    /// Per-node fingerprints of execution `row` at `depth`.
    pub fn fingerprints(&self, row: usize, depth: RoundingDepth) -> Vec<Option<Fingerprint>> {
        self.rows[row]
            .means
            .iter()
            .enumerate()
            .map(|(node, m)| {
                m.as_ref()
                    .map(|m| Fingerprint::new(self.metric_name.clone(), node, self.interval, m.round(depth)))
            })
            .collect()
    }
}
