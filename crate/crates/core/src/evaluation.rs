//! Evaluation protocols and F-score reporting.
//!
//! Five protocols split executions along the application and input-size
//! dimensions:
//!
//! | kind           | training side                         | test side                        |
//! |----------------|---------------------------------------|----------------------------------|
//! | `normal_fold`  | k-1 folds                             | held-out fold                    |
//! | `soft_input`   | k-1 folds minus one input size        | held-out fold (unchanged)        |
//! | `soft_unknown` | k-1 folds minus one application       | held-out fold (unchanged)        |
//! | `hard_input`   | everything except one input size      | only that input size             |
//! | `hard_unknown` | everything except one application     | only that application            |
//!
//! Scoring is at application-name granularity. In the unknown protocols the
//! removed application's executions have truth [`UNKNOWN`], so finding no
//! match is the correct answer. Runs over removals are averaged with equal
//! weight. F-scores are macro averages over truth classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Efd, UNKNOWN};
use crate::error::{Error, Result};
use crate::fingerprint::FingerprintTable;
use crate::model::{AppLabel, Dataset};
use crate::rounding::RoundingDepth;
use crate::tuning::{fold_plan, tune_on_table, TuningConfig};

/// Written into every report header.
pub const AVERAGING: &str = "macro";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NormalFold,
    SoftInput,
    SoftUnknown,
    HardInput,
    HardUnknown,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::NormalFold,
        ExperimentKind::SoftInput,
        ExperimentKind::SoftUnknown,
        ExperimentKind::HardInput,
        ExperimentKind::HardUnknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::NormalFold => "normal_fold",
            ExperimentKind::SoftInput => "soft_input",
            ExperimentKind::SoftUnknown => "soft_unknown",
            ExperimentKind::HardInput => "hard_input",
            ExperimentKind::HardUnknown => "hard_unknown",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub execution_id: String,
    pub truth_app: String,
    /// First recognition candidate, or [`UNKNOWN`].
    pub predicted_app: String,
}

/// Macro F-score over truth classes plus per-class F over every class seen
/// as truth or prediction.
pub fn f_score(records: &[PredictionRecord]) -> Result<(f64, BTreeMap<String, f64>)> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    #[derive(Default)]
    struct Counts {
        tp: usize,
        fp: usize,
        fn_: usize,
    }
    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut truths: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        truths.insert(&r.truth_app);
        if r.truth_app == r.predicted_app {
            counts.entry(&r.truth_app).or_default().tp += 1;
        } else {
            counts.entry(&r.truth_app).or_default().fn_ += 1;
            counts.entry(&r.predicted_app).or_default().fp += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class: BTreeMap<String, f64> = counts
        .iter()
        .map(|(class, c)| {
            let p = ratio(c.tp, c.tp + c.fp);
            let r = ratio(c.tp, c.tp + c.fn_);
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (class.to_string(), f)
        })
        .collect();
    let macro_f = truths.iter().map(|t| per_class[*t]).sum::<f64>() / truths.len() as f64;
    Ok((macro_f, per_class))
}

/// How each training side picks its rounding depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepthChoice {
    /// Cross-validate inside the training side.
    Tuned,
    Fixed(RoundingDepth),
}

/// One train/test split inside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    /// Outer fold index; `None` for the single split of hard protocols.
    pub fold: Option<usize>,
    pub depth: RoundingDepth,
    pub f_score: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// One removal (or the whole dataset for `normal_fold`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Removed input size or application.
    pub removal: Option<String>,
    pub f_score: f64,
    pub per_class_f: BTreeMap<String, f64>,
    pub splits: Vec<SplitOutcome>,
    pub records: Vec<PredictionRecord>,
    /// Test executions lacking the metric, predicted as unknown.
    pub missing_metric: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub metric_name: String,
    pub averaging: String,
    /// Mean of the per-run F-scores.
    pub f_score: f64,
    /// Per truth class, mean over the runs in which the class is a truth class.
    pub per_class_f: BTreeMap<String, f64>,
    /// truth -> predicted -> count, summed over runs.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    pub runs_averaged: usize,
    pub runs: Vec<RunReport>,
}

struct Context<'a> {
    table: FingerprintTable,
    labels: Vec<&'a AppLabel>,
    ids: Vec<&'a str>,
    cfg: &'a TuningConfig,
    depth: DepthChoice,
}

struct Split {
    fold: Option<usize>,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Context<'_> {
    fn run_split(
        &self,
        split: &Split,
        truth: &(dyn Fn(usize) -> String + Sync),
    ) -> Result<(SplitOutcome, Vec<PredictionRecord>, usize)> {
        if split.train.is_empty() || !split.train.iter().any(|&r| self.table.has_metric(r)) {
            return Err(Error::MetricNotFound(self.cfg.metric_name.clone()));
        }
        let depth = match self.depth {
            DepthChoice::Fixed(d) => d,
            DepthChoice::Tuned => tune_on_table(&self.table, &self.labels, &split.train, self.cfg)?.chosen_depth,
        };
        let efd = Efd::build_from_table(&self.table, &self.labels, &split.train, depth)?;
        let mut missing = 0;
        let records: Vec<PredictionRecord> = split
            .test
            .iter()
            .map(|&r| {
                let predicted = if self.table.has_metric(r) {
                    efd.recognize_fingerprints(&self.table.fingerprints(r, depth))
                        .predicted()
                        .to_string()
                } else {
                    missing += 1;
                    UNKNOWN.to_string()
                };
                PredictionRecord {
                    execution_id: self.ids[r].to_string(),
                    truth_app: truth(r),
                    predicted_app: predicted,
                }
            })
            .collect();
        let outcome = SplitOutcome {
            fold: split.fold,
            depth,
            f_score: f_score(&records)?.0,
            train_size: split.train.len(),
            test_size: split.test.len(),
        };
        Ok((outcome, records, missing))
    }

    fn run(
        &self,
        removal: Option<String>,
        splits: Vec<Split>,
        truth: &(dyn Fn(usize) -> String + Sync),
    ) -> Result<RunReport> {
        let results: Vec<_> = splits
            .par_iter()
            .map(|s| self.run_split(s, truth))
            .collect::<Result<_>>()?;
        let mut records = Vec::new();
        let mut outcomes = Vec::new();
        let mut missing_metric = 0;
        for (o, r, m) in results {
            outcomes.push(o);
            records.extend(r);
            missing_metric += m;
        }
        let (f, per_class) = f_score(&records)?;
        let truths: BTreeSet<&str> = records.iter().map(|r| r.truth_app.as_str()).collect();
        let per_class_f = per_class
            .into_iter()
            .filter(|(c, _)| truths.contains(c.as_str()))
            .collect();
        Ok(RunReport {
            removal,
            f_score: f,
            per_class_f,
            splits: outcomes,
            records,
            missing_metric,
        })
    }
}

fn precondition(kind: ExperimentKind, reason: impl Into<String>) -> Error {
    Error::Precondition {
        experiment: kind.to_string(),
        reason: reason.into(),
    }
}

pub fn run_experiment(
    kind: ExperimentKind,
    d: &Dataset,
    cfg: &TuningConfig,
    depth: DepthChoice,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let labels = d.labels()?;
    if d.is_empty() {
        return Err(precondition(kind, "empty dataset"));
    }
    if !d.executions().iter().any(|e| e.has_metric(&cfg.metric_name)) {
        return Err(Error::MetricNotFound(cfg.metric_name.clone()));
    }
    let ctx = Context {
        table: FingerprintTable::new(d, &cfg.metric_name, cfg.interval)?,
        ids: d.executions().iter().map(|e| e.execution_id()).collect(),
        labels,
        cfg,
        depth,
    };
    let n = d.len();
    let app = |r: usize| ctx.labels[r].application_name().to_string();
    let inputs = d.input_sizes();
    let apps = d.application_names();

    let outer_folds = || -> Result<Vec<Split>> {
        let plan = fold_plan(&ctx.labels, cfg.folds, cfg.seed)?;
        Ok((0..cfg.folds)
            .map(|f| Split {
                fold: Some(f),
                train: plan.train(f, n),
                test: plan.validate[f].clone(),
            })
            .collect())
    };
    let input_of = |r: usize| ctx.labels[r].input_size();
    let app_of = |r: usize| ctx.labels[r].application_name();

    let runs: Vec<RunReport> = match kind {
        ExperimentKind::NormalFold => vec![ctx.run(None, outer_folds()?, &app)?],
        ExperimentKind::SoftInput => {
            if inputs.len() < 2 {
                return Err(precondition(kind, "needs at least 2 input sizes"));
            }
            let folds = outer_folds()?;
            inputs
                .par_iter()
                .map(|s| {
                    let splits = folds
                        .iter()
                        .map(|f| Split {
                            fold: f.fold,
                            train: f.train.iter().copied().filter(|&r| input_of(r) != s).collect(),
                            test: f.test.clone(),
                        })
                        .collect();
                    ctx.run(Some(s.clone()), splits, &app)
                })
                .collect::<Result<_>>()?
        }
        ExperimentKind::SoftUnknown => {
            if apps.len() < 2 {
                return Err(precondition(kind, "needs at least 2 applications"));
            }
            let folds = outer_folds()?;
            apps.par_iter()
                .map(|a| {
                    let splits = folds
                        .iter()
                        .map(|f| Split {
                            fold: f.fold,
                            train: f.train.iter().copied().filter(|&r| app_of(r) != a).collect(),
                            test: f.test.clone(),
                        })
                        .collect();
                    let truth = |r: usize| if app_of(r) == a { UNKNOWN.to_string() } else { app(r) };
                    ctx.run(Some(a.clone()), splits, &truth)
                })
                .collect::<Result<_>>()?
        }
        ExperimentKind::HardInput => {
            if inputs.len() < 2 {
                return Err(precondition(kind, "needs at least 2 input sizes"));
            }
            inputs
                .par_iter()
                .map(|s| {
                    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| input_of(r) == s);
                    let split = Split {
                        fold: None,
                        train,
                        test,
                    };
                    ctx.run(Some(s.clone()), vec![split], &app)
                })
                .collect::<Result<_>>()?
        }
        ExperimentKind::HardUnknown => {
            if apps.len() < 2 {
                return Err(precondition(kind, "needs at least 2 applications"));
            }
            apps.par_iter()
                .map(|a| {
                    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| app_of(r) == a);
                    let split = Split {
                        fold: None,
                        train,
                        test,
                    };
                    ctx.run(Some(a.clone()), vec![split], &|_| UNKNOWN.to_string())
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(aggregate(kind, &cfg.metric_name, runs))
}

fn aggregate(kind: ExperimentKind, metric: &str, runs: Vec<RunReport>) -> ExperimentReport {
    let f_score = runs.iter().map(|r| r.f_score).sum::<f64>() / runs.len() as f64;
    let mut class_scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for run in &runs {
        for (c, f) in &run.per_class_f {
            class_scores.entry(c.clone()).or_default().push(*f);
        }
        for rec in &run.records {
            *confusion
                .entry(rec.truth_app.clone())
                .or_default()
                .entry(rec.predicted_app.clone())
                .or_default() += 1;
        }
    }
    let per_class_f = class_scores
        .into_iter()
        .map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    ExperimentReport {
        kind,
        metric_name: metric.to_string(),
        averaging: AVERAGING.to_string(),
        f_score,
        per_class_f,
        confusion,
        runs_averaged: runs.len(),
        runs,
    }
}

/// One `normal_fold` report per metric, best first. Ties keep input order.
pub fn metric_sweep(
    d: &Dataset,
    metrics: &[String],
    cfg: &TuningConfig,
    depth: DepthChoice,
) -> Result<Vec<ExperimentReport>> {
    if metrics.is_empty() {
        return Err(Error::InvalidConfig("metric sweep needs at least one metric".into()));
    }
    let mut reports: Vec<ExperimentReport> = metrics
        .iter()
        .map(|m| {
            let cfg = TuningConfig {
                metric_name: m.clone(),
                ..cfg.clone()
            };
            run_experiment(ExperimentKind::NormalFold, d, &cfg, depth)
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| b.f_score.total_cmp(&a.f_score));
    Ok(reports)
}

/// Column order of [`write_report_csv`].
pub const REPORT_COLUMNS: [&str; 5] = ["experiment", "metric", "removal", "fold", "f_score"];

/// Per-split rows, one `fold=all` row per run, then a summary block with
/// one `removal=mean` row per experiment. `-` marks an absent removal or
/// fold.
pub fn write_report_csv<W: Write>(reports: &[ExperimentReport], mut out: W) -> Result<()> {
    writeln!(out, "# efd-report v1 averaging={AVERAGING}")?;
    writeln!(out, "{}", REPORT_COLUMNS.join(","))?;
    for rep in reports {
        for run in &rep.runs {
            let removal = run.removal.as_deref().unwrap_or("-");
            for s in &run.splits {
                let fold = s.fold.map_or("-".to_string(), |f| f.to_string());
                writeln!(
                    out,
                    "{},{},{removal},{fold},{:.6}",
                    rep.kind, rep.metric_name, s.f_score
                )?;
            }
            writeln!(out, "{},{},{removal},all,{:.6}", rep.kind, rep.metric_name, run.f_score)?;
        }
    }
    writeln!(out, "# summary")?;
    for rep in reports {
        writeln!(out, "{},{},mean,all,{:.6}", rep.kind, rep.metric_name, rep.f_score)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub experiment: ExperimentKind,
    pub metric: String,
    pub averaging: String,
    pub f_score: f64,
    pub runs_averaged: usize,
    pub removals: Vec<RemovalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalSummary {
    pub removal: Option<String>,
    pub f_score: f64,
    pub depths: Vec<u32>,
}

pub fn summarize(reports: &[ExperimentReport]) -> Vec<ReportSummary> {
    reports
        .iter()
        .map(|r| ReportSummary {
            experiment: r.kind,
            metric: r.metric_name.clone(),
            averaging: r.averaging.clone(),
            f_score: r.f_score,
            runs_averaged: r.runs_averaged,
            removals: r
                .runs
                .iter()
                .map(|run| RemovalSummary {
                    removal: run.removal.clone(),
                    f_score: run.f_score,
                    depths: run.splits.iter().map(|s| s.depth.get()).collect(),
                })
                .collect(),
        })
        .collect()
}

/// Fixed-width experiment/metric/F-score table.
pub fn summary_table(reports: &[ExperimentReport]) -> String {
    let width = reports.iter().map(|r| r.metric_name.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<14}  {:<width$}  f_score ({AVERAGING})\n", "experiment", "metric");
    for r in reports {
        out.push_str(&format!(
            "{:<14}  {:<width$}  {:.2}\n",
            r.kind.as_str(),
            r.metric_name,
            r.f_score
        ));
    }
    out
}

/// Per-metric ranking, in the order given.
pub fn metric_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("metric,f_score_normal_fold\n");
    for r in reports {
        out.push_str(&format!("{},{:.2}\n", r.metric_name, r.f_score));
    }
    out
}
