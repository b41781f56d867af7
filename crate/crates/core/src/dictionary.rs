//! The execution fingerprint dictionary: build, lookup, recognition and
//! the line-delimited persistence format.
//!
//! File layout:
//!
//! ```text
//! EFD v1 metric=nr_mapped_vmstat interval=[60:120] depth=2
//! nr_mapped_vmstat|0|[60:120]|6000.0<TAB>ft_X,ft_Y,ft_Z
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{make_fingerprint, Fingerprint, FingerprintTable, Interval};
use crate::model::{AppLabel, Dataset, Execution};
use crate::rounding::RoundingDepth;

const FORMAT_VERSION: &str = "v1";

/// Prediction token for executions without any matching fingerprint.
pub const UNKNOWN: &str = "unknown";

/// One dictionary per metric and interval, keyed by fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Efd {
    metric_name: String,
    interval: Interval,
    depth: RoundingDepth,
    entries: IndexMap<Fingerprint, Vec<AppLabel>>,
}

/// Outcome of [`Efd::build_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub executions: usize,
    pub fingerprints_inserted: usize,
    /// Nodes that carry the metric but have no samples inside the window.
    pub nodes_skipped: usize,
}

/// Result of looking up every node of one execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recognition {
    /// Application names with the most votes, in dictionary order. Empty
    /// means unknown.
    pub candidates: Vec<String>,
    pub votes: BTreeMap<String, usize>,
    /// Nodes whose fingerprint was found in the dictionary.
    pub nodes_matched: usize,
    pub node_count: usize,
}

impl Recognition {
    /// First candidate, or [`UNKNOWN`].
    pub fn predicted(&self) -> &str {
        self.candidates.first().map_or(UNKNOWN, String::as_str)
    }

    pub fn is_unknown(&self) -> bool {
        self.candidates.is_empty()
    }
}

impl Efd {
    pub fn new(metric_name: impl Into<String>, interval: Interval, depth: RoundingDepth) -> Self {
        Efd {
            metric_name: metric_name.into(),
            interval,
            depth,
            entries: IndexMap::new(),
        }
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn depth(&self) -> RoundingDepth {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> impl Iterator<Item = (&Fingerprint, &[AppLabel])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    fn check_key(&self, fp: &Fingerprint) -> Result<()> {
        if fp.metric_name() != self.metric_name || fp.interval() != self.interval {
            return Err(Error::KeyMismatch {
                fingerprint: fp.to_string(),
                metric: self.metric_name.clone(),
                interval: self.interval.to_string(),
            });
        }
        Ok(())
    }

    /// Appends `label` to the value set of `fp` unless already present.
    pub fn insert(&mut self, fp: Fingerprint, label: AppLabel) -> Result<()> {
        self.check_key(&fp)?;
        let labels = self.entries.entry(fp).or_default();
        if !labels.contains(&label) {
            labels.push(label);
        }
        Ok(())
    }

    /// Exact match on the canonical key.
    pub fn lookup(&self, fp: &Fingerprint) -> Option<&[AppLabel]> {
        self.entries.get(fp).map(Vec::as_slice)
    }

    pub fn build(training: &Dataset, metric: &str, interval: Interval, depth: RoundingDepth) -> Result<Efd> {
        Self::build_with_stats(training, metric, interval, depth).map(|(efd, _)| efd)
    }

    /// Inserts one fingerprint per node per execution, in dataset order and
    /// ascending node index. Nodes without window data are skipped and counted.
    pub fn build_with_stats(
        training: &Dataset,
        metric: &str,
        interval: Interval,
        depth: RoundingDepth,
    ) -> Result<(Efd, BuildStats)> {
        let labels = training.labels()?;
        if !training.executions().iter().any(|e| e.has_metric(metric)) {
            return Err(Error::MetricNotFound(metric.to_string()));
        }
        let mut efd = Efd::new(metric, interval, depth);
        let mut stats = BuildStats {
            executions: training.len(),
            ..BuildStats::default()
        };
        for (e, label) in training.executions().iter().zip(labels) {
            for node in 0..e.node_count() {
                let Some(series) = e.series(metric, node) else {
                    continue;
                };
                match make_fingerprint(series, interval, depth) {
                    Ok(fp) => {
                        efd.insert(fp, label.clone())?;
                        stats.fingerprints_inserted += 1;
                    }
                    Err(Error::WindowDataMissing { .. }) => stats.nodes_skipped += 1,
                    Err(other) => return Err(other),
                }
            }
        }
        if stats.nodes_skipped > 0 {
            log::warn!(
                "{metric}: skipped {} node(s) without samples in {interval}",
                stats.nodes_skipped
            );
        }
        Ok((efd, stats))
    }

    /// Builds from precomputed means for the executions at `rows` of the
    /// dataset `table` was built from.
    pub fn build_from_table(
        table: &FingerprintTable,
        labels: &[&AppLabel],
        rows: &[usize],
        depth: RoundingDepth,
    ) -> Result<Efd> {
        let mut efd = Efd::new(table.metric_name(), table.interval(), depth);
        for &row in rows {
            for fp in table.fingerprints(row, depth).into_iter().flatten() {
                efd.insert(fp, labels[row].clone())?;
            }
        }
        Ok(efd)
    }

    /// Application names in order of first appearance when reading entries in
    /// insertion order and each value set front to back. Used to order tied
    /// candidates; derivable from the persisted file alone.
    pub fn application_order(&self) -> IndexSet<&str> {
        self.entries
            .values()
            .flatten()
            .map(AppLabel::application_name)
            .collect()
    }

    pub fn recognize(&self, exec: &Execution) -> Result<Recognition> {
        if !exec.has_metric(&self.metric_name) {
            return Err(Error::MetricAbsent {
                execution_id: exec.execution_id().to_string(),
                metric: self.metric_name.clone(),
            });
        }
        let mut fps = Vec::with_capacity(exec.node_count());
        for node in 0..exec.node_count() {
            let fp = match exec.series(&self.metric_name, node) {
                None => None,
                Some(s) => match make_fingerprint(s, self.interval, self.depth) {
                    Ok(fp) => Some(fp),
                    Err(Error::WindowDataMissing { .. }) => None,
                    Err(other) => return Err(other),
                },
            };
            fps.push(fp);
        }
        Ok(self.recognize_fingerprints(&fps))
    }

    /// Votes over per-node fingerprints (`None` for nodes without data).
    ///
    /// Each application name found in a node's value set gets one vote for
    /// that node, however many of its input sizes share the entry.
    pub fn recognize_fingerprints(&self, fps: &[Option<Fingerprint>]) -> Recognition {
        let mut votes: BTreeMap<String, usize> = BTreeMap::new();
        let mut nodes_matched = 0;
        for fp in fps.iter().flatten() {
            let Some(labels) = self.lookup(fp) else {
                continue;
            };
            nodes_matched += 1;
            let apps: IndexSet<&str> = labels.iter().map(AppLabel::application_name).collect();
            for app in apps {
                *votes.entry(app.to_string()).or_default() += 1;
            }
        }
        let best = votes.values().copied().max().unwrap_or(0);
        let candidates = if best == 0 {
            Vec::new()
        } else {
            self.application_order()
                .into_iter()
                .filter(|a| votes.get(*a) == Some(&best))
                .map(str::to_string)
                .collect()
        };
        Recognition {
            candidates,
            votes,
            nodes_matched,
            node_count: fps.len(),
        }
    }

    pub fn header(&self) -> String {
        format!(
            "EFD {FORMAT_VERSION} metric={} interval={} depth={}",
            self.metric_name, self.interval, self.depth
        )
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.header())?;
        for (fp, labels) in &self.entries {
            let joined: Vec<String> = labels.iter().map(AppLabel::to_string).collect();
            writeln!(out, "{fp}\t{}", joined.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("dictionary text is UTF-8")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Efd> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.ok_or_else(|| Error::DictionaryFormat {
            line: 1,
            reason: "missing header".into(),
        })?;
        let mut efd = parse_header(&header)?;
        let mut seen_labels: HashSet<AppLabel> = HashSet::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let err = |reason: String| Error::DictionaryFormat { line: lineno, reason };
            let (key, values) = line
                .split_once('\t')
                .ok_or_else(|| err("expected <fingerprint><TAB><labels>".into()))?;
            let fp: Fingerprint = key.parse().map_err(|e: Error| err(e.to_string()))?;
            efd.check_key(&fp).map_err(|e| err(e.to_string()))?;
            if efd.entries.contains_key(&fp) {
                return Err(err(format!("duplicate key {fp}")));
            }
            seen_labels.clear();
            let mut labels = Vec::new();
            for v in values.split(',') {
                let label: AppLabel = v.parse().map_err(|e: Error| err(e.to_string()))?;
                if !seen_labels.insert(label.clone()) {
                    return Err(err(format!("duplicate label {label}")));
                }
                labels.push(label);
            }
            efd.entries.insert(fp, labels);
        }
        Ok(efd)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Efd> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn parse_header(line: &str) -> Result<Efd> {
    let err = |reason: String| Error::DictionaryFormat { line: 1, reason };
    let mut parts = line.split(' ');
    if parts.next() != Some("EFD") {
        return Err(err(format!("not a dictionary header: {line:?}")));
    }
    match parts.next() {
        Some(FORMAT_VERSION) => {}
        other => return Err(err(format!("unsupported version {:?}", other.unwrap_or("")))),
    }
    let mut field = |name: &str| -> Result<String> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(name))
            .and_then(|p| p.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| err(format!("expected {name}=...")))
    };
    let metric = field("metric")?;
    let interval: Interval = field("interval")?.parse().map_err(|e: Error| err(e.to_string()))?;
    let depth: RoundingDepth = field("depth")?.parse().map_err(|e: Error| err(e.to_string()))?;
    if metric.is_empty() {
        return Err(err("empty metric name".into()));
    }
    if parts.next().is_some() {
        return Err(err("trailing header fields".into()));
    }
    Ok(Efd::new(metric, interval, depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_app_label, NodeSeries};
    use crate::rounding::CanonicalDecimal;

    const M: &str = "nr_mapped_vmstat";

    fn depth(d: u32) -> RoundingDepth {
        RoundingDepth::new(d).unwrap()
    }

    fn key(node: usize, mean: &str) -> Fingerprint {
        Fingerprint::new(M, node, Interval::default(), mean.parse::<CanonicalDecimal>().unwrap())
    }

    fn label(s: &str) -> AppLabel {
        parse_app_label(s).unwrap()
    }

    /// Execution whose node `n` holds a constant value `means[n]`.
    fn exec(id: &str, lbl: Option<&str>, means: &[f64]) -> Execution {
        let series = means
            .iter()
            .enumerate()
            .map(|(n, &m)| NodeSeries::new(M, n, (0..150).map(|t| (t as f64, m)).collect()).unwrap());
        Execution::new(id, lbl.map(label), means.len())
            .unwrap()
            .with_series(series)
            .unwrap()
    }

    #[test]
    fn insert_is_idempotent() {
        let mut efd = Efd::new(M, Interval::default(), depth(2));
        efd.insert(key(0, "6000.0"), label("ft_X")).unwrap();
        efd.insert(key(0, "6000.0"), label("ft_X")).unwrap();
        assert_eq!(efd.lookup(&key(0, "6000.0")).unwrap(), [label("ft_X")]);
    }

    #[test]
    fn insert_keeps_label_order() {
        let mut efd = Efd::new(M, Interval::default(), depth(2));
        efd.insert(key(0, "7600.0"), label("sp_X")).unwrap();
        efd.insert(key(0, "7600.0"), label("bt_X")).unwrap();
        efd.insert(key(1, "7500.0"), label("sp_X")).unwrap();
        assert_eq!(efd.lookup(&key(0, "7600.0")).unwrap(), [label("sp_X"), label("bt_X")]);
        assert_eq!(efd.len(), 2);
    }

    #[test]
    fn insert_rejects_foreign_keys() {
        let mut efd = Efd::new(M, Interval::default(), depth(2));
        let other_metric = Fingerprint::new("Active_meminfo", 0, Interval::default(), "1.0".parse().unwrap());
        let other_iv = Fingerprint::new(M, 0, Interval::new(0, 60).unwrap(), "1.0".parse().unwrap());
        assert!(matches!(
            efd.insert(other_metric, label("ft_X")),
            Err(Error::KeyMismatch { .. })
        ));
        assert!(matches!(
            efd.insert(other_iv, label("ft_X")),
            Err(Error::KeyMismatch { .. })
        ));
    }

    #[test]
    fn lookup_misses_unseen_keys() {
        let mut efd = Efd::new(M, Interval::default(), depth(2));
        efd.insert(key(0, "6000.0"), label("ft_X")).unwrap();
        assert!(efd.lookup(&key(1, "6000.0")).is_none());
        assert!(efd.lookup(&key(0, "6100.0")).is_none());
    }

    #[test]
    fn build_dedups_identical_nodes() {
        let d = Dataset::new(vec![exec("a", Some("ft_X"), &[6021.0; 4])]).unwrap();
        let efd = Efd::build(&d, M, Interval::default(), depth(1)).unwrap();
        // Node index is part of the key, so four nodes give four entries of one label.
        assert_eq!(efd.len(), 4);
        assert!(efd.entries().all(|(_, v)| v == [label("ft_X")]));

        let one = Dataset::new(vec![exec("a", Some("ft_X"), &[6021.0])]).unwrap();
        let d2 = Dataset::new(vec![
            exec("a", Some("ft_X"), &[6021.0]),
            exec("b", Some("ft_X"), &[6010.0]),
        ])
        .unwrap();
        assert_eq!(
            Efd::build(&d2, M, Interval::default(), depth(2)).unwrap().to_text(),
            Efd::build(&one, M, Interval::default(), depth(2)).unwrap().to_text()
        );
    }

    #[test]
    fn build_separates_distant_means() {
        // 3000 and 7000 fall into different depth-1 buckets.
        let d = Dataset::new(vec![
            exec("a", Some("ft_X"), &[3000.0]),
            exec("b", Some("mg_X"), &[7000.0]),
        ])
        .unwrap();
        let efd = Efd::build(&d, M, Interval::default(), depth(1)).unwrap();
        assert_eq!(efd.len(), 2);
        assert_eq!(efd.lookup(&key(0, "3000.0")).unwrap(), [label("ft_X")]);
        assert_eq!(efd.lookup(&key(0, "7000.0")).unwrap(), [label("mg_X")]);
    }

    #[test]
    fn build_errors() {
        let d = Dataset::new(vec![exec("a", Some("ft_X"), &[1.0])]).unwrap();
        assert!(matches!(
            Efd::build(&d, "missing", Interval::default(), depth(2)),
            Err(Error::MetricNotFound(_))
        ));
        let d = Dataset::new(vec![exec("a", None, &[1.0])]).unwrap();
        assert!(matches!(
            Efd::build(&d, M, Interval::default(), depth(2)),
            Err(Error::UnlabeledExecution(_))
        ));
    }

    #[test]
    fn build_skips_nodes_without_window_data() {
        let short = Execution::new("s", Some(label("ft_X")), 2)
            .unwrap()
            .with_series([
                NodeSeries::new(M, 0, (0..150).map(|t| (t as f64, 5.0)).collect()).unwrap(),
                NodeSeries::new(M, 1, (0..30).map(|t| (t as f64, 5.0)).collect()).unwrap(),
            ])
            .unwrap();
        let d = Dataset::new(vec![short]).unwrap();
        let (efd, stats) = Efd::build_with_stats(&d, M, Interval::default(), depth(2)).unwrap();
        assert_eq!(efd.len(), 1);
        assert_eq!(stats.nodes_skipped, 1);
        assert_eq!(stats.fingerprints_inserted, 1);
    }

    #[test]
    fn recognize_majority_and_ties() {
        let train = Dataset::new(vec![
            exec("a", Some("A_X"), &[100.0, 200.0, 300.0, 400.0]),
            exec("b", Some("B_X"), &[900.0, 800.0, 700.0, 600.0]),
            exec("c", Some("C_X"), &[100.0, 200.0, 300.0, 400.0]),
        ])
        .unwrap();
        let efd = Efd::build(&train, M, Interval::default(), depth(3)).unwrap();

        let r = efd.recognize(&exec("t", None, &[100.0, 200.0, 300.0, 600.0])).unwrap();
        assert_eq!(r.candidates, ["A", "C"]);
        assert_eq!(
            r.votes,
            BTreeMap::from([("A".into(), 3), ("B".into(), 1), ("C".into(), 3)])
        );
        assert_eq!(r.predicted(), "A");
        assert_eq!(r.nodes_matched, 4);

        let r = efd.recognize(&exec("t", None, &[900.0, 800.0, 700.0, 400.0])).unwrap();
        assert_eq!(r.candidates, ["B"]);

        let r = efd.recognize(&exec("t", None, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!(r.is_unknown());
        assert_eq!(r.predicted(), UNKNOWN);
        assert!(r.votes.is_empty());
    }

    #[test]
    fn one_vote_per_application_per_node() {
        let train = Dataset::new(vec![
            exec("1", Some("sp_X"), &[7600.0]),
            exec("2", Some("sp_Y"), &[7600.0]),
            exec("3", Some("sp_Z"), &[7600.0]),
            exec("4", Some("bt_X"), &[7600.0]),
        ])
        .unwrap();
        let efd = Efd::build(&train, M, Interval::default(), depth(2)).unwrap();
        let r = efd.recognize(&exec("t", None, &[7610.0])).unwrap();
        assert_eq!(r.votes, BTreeMap::from([("bt".into(), 1), ("sp".into(), 1)]));
        assert_eq!(r.candidates, ["sp", "bt"]);
    }

    #[test]
    fn node_indices_match_strictly() {
        let train = Dataset::new(vec![exec("a", Some("A_X"), &[100.0, 200.0])]).unwrap();
        let efd = Efd::build(&train, M, Interval::default(), depth(3)).unwrap();
        assert!(efd.recognize(&exec("t", None, &[200.0, 100.0])).unwrap().is_unknown());
        // Larger executions only match on overlapping node indices.
        let r = efd.recognize(&exec("t", None, &[100.0, 200.0, 100.0, 100.0])).unwrap();
        assert_eq!(r.votes["A"], 2);
    }

    #[test]
    fn metric_absence_is_an_error_not_unknown() {
        let train = Dataset::new(vec![exec("a", Some("A_X"), &[100.0])]).unwrap();
        let efd = Efd::build(&train, M, Interval::default(), depth(3)).unwrap();
        let other = Execution::new("t", None, 1)
            .unwrap()
            .with_series([NodeSeries::new("other", 0, vec![(60.0, 1.0)]).unwrap()])
            .unwrap();
        assert!(matches!(efd.recognize(&other), Err(Error::MetricAbsent { .. })));
    }

    #[test]
    fn persistence_roundtrip() {
        let mut efd = Efd::new(M, Interval::default(), depth(2));
        efd.insert(key(0, "7600.0"), label("sp_X")).unwrap();
        efd.insert(key(0, "7600.0"), label("bt_X")).unwrap();
        efd.insert(key(1, "0.04"), label("miniAMR_Z")).unwrap();
        let text = efd.to_text();
        assert_eq!(
            text,
            "EFD v1 metric=nr_mapped_vmstat interval=[60:120] depth=2\n\
             nr_mapped_vmstat|0|[60:120]|7600.0\tsp_X,bt_X\n\
             nr_mapped_vmstat|1|[60:120]|0.04\tminiAMR_Z\n"
        );
        let back = Efd::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, efd);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn empty_dictionary_is_header_only() {
        let efd = Efd::new(M, Interval::default(), depth(3));
        let text = efd.to_text();
        assert_eq!(text.lines().count(), 1);
        assert!(Efd::read_from(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let header = "EFD v1 metric=nr_mapped_vmstat interval=[60:120] depth=2";
        let line = "nr_mapped_vmstat|0|[60:120]|6000.0\tft_X";
        let cases = [
            (format!("{header}\n{line}\n{line}\n"), 3),
            (format!("{header}\n{line}\nnr_mapped_vmstat|1|[60:120]|6000.0\n"), 3),
            (format!("{header}\nnr_mapped_vmstat|0|[60:120]|6000\tft_X\n"), 2),
            (format!("{header}\nother|0|[60:120]|6000.0\tft_X\n"), 2),
            (format!("{header}\n{line},ft_X\n"), 2),
            (format!("{header}\n{line},ft\n"), 2),
            ("EFD v2 metric=m interval=[60:120] depth=2\n".to_string(), 1),
            ("EFD v1 metric=m interval=[60:120] depth=0\n".to_string(), 1),
            ("EFD v1 metric=m depth=2\n".to_string(), 1),
            (String::new(), 1),
        ];
        for (text, expected) in cases {
            match Efd::read_from(text.as_bytes()) {
                Err(Error::DictionaryFormat { line, .. }) => assert_eq!(line, expected, "{text:?}"),
                other => panic!("expected format error for {text:?}, got {other:?}"),
            }
        }
    }
}
