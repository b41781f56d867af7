//! Rounding-depth selection by cross-validation inside a training set.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Efd, UNKNOWN};
use crate::error::{Error, Result};
use crate::evaluation::{f_score, PredictionRecord};
use crate::fingerprint::{FingerprintTable, Interval};
use crate::model::{AppLabel, Dataset};
use crate::rounding::RoundingDepth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Candidate depths, ascending.
    pub depths_to_search: Vec<RoundingDepth>,
    pub folds: usize,
    pub seed: u64,
    pub interval: Interval,
    pub metric_name: String,
}

impl TuningConfig {
    /// Depths 1..=6, five folds, seed 42, window `[60:120]`.
    pub fn new(metric_name: impl Into<String>) -> Self {
        TuningConfig {
            depths_to_search: (1..=6).map(|d| RoundingDepth::new(d).expect("positive")).collect(),
            folds: 5,
            seed: 42,
            interval: Interval::default(),
            metric_name: metric_name.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.depths_to_search.is_empty() {
            return Err(Error::InvalidConfig("no rounding depths to search".into()));
        }
        if self.depths_to_search.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "rounding depths must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub chosen_depth: RoundingDepth,
    /// Mean validation F-score per depth.
    pub per_depth_scores: BTreeMap<u32, f64>,
    pub folds_used: usize,
    pub stratified: bool,
}

/// Validation index sets of a k-fold split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// One ascending list of positions per fold.
    pub validate: Vec<Vec<usize>>,
    pub stratified: bool,
}

impl FoldPlan {
    /// Positions outside fold `fold`, ascending.
    pub fn train(&self, fold: usize, n: usize) -> Vec<usize> {
        let mut mask = vec![true; n];
        for &i in &self.validate[fold] {
            mask[i] = false;
        }
        (0..n).filter(|&i| mask[i]).collect()
    }
}

/// Assigns positions `0..labels.len()` to `k` folds, stratified by full label.
///
/// Each class is shuffled and dealt round-robin, continuing where the
/// previous class stopped, so every class lands within one execution of its
/// proportional share in each fold. Falls back to an unstratified split
/// when some class has fewer than `k` members.
pub fn fold_plan(labels: &[&AppLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("folds must be at least 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::TooFewExecutions {
            folds: k,
            executions: labels.len(),
        });
    }
    let mut classes: IndexMap<&AppLabel, Vec<usize>> = IndexMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(*l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut validate = vec![Vec::new(); k];
    let stratified = classes.values().all(|members| members.len() >= k);
    if stratified {
        let mut dealt = 0;
        for members in classes.values_mut() {
            members.shuffle(&mut rng);
            for &i in members.iter() {
                validate[dealt % k].push(i);
                dealt += 1;
            }
        }
    } else {
        log::warn!("some class has fewer than {k} executions; using unstratified folds");
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        for (j, i) in all.into_iter().enumerate() {
            validate[j % k].push(i);
        }
    }
    for v in &mut validate {
        v.sort_unstable();
    }
    Ok(FoldPlan { validate, stratified })
}

/// `(train, validate)` pairs of a stratified k-fold split.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let labels = d.labels()?;
    let plan = fold_plan(&labels, k, seed)?;
    Ok((0..k)
        .map(|f| (d.select(&plan.train(f, d.len())), d.select(&plan.validate[f])))
        .collect())
}

pub fn tune_depth(training: &Dataset, cfg: &TuningConfig) -> Result<TuningResult> {
    cfg.validate()?;
    let labels = training.labels()?;
    if !training.executions().iter().any(|e| e.has_metric(&cfg.metric_name)) {
        return Err(Error::MetricNotFound(cfg.metric_name.clone()));
    }
    let table = FingerprintTable::new(training, &cfg.metric_name, cfg.interval)?;
    let rows: Vec<usize> = (0..training.len()).collect();
    tune_on_table(&table, &labels, &rows, cfg)
}

/// Tunes on the executions at `rows` of the dataset behind `table`.
///
/// The fold count is reduced to `rows.len()` when fewer executions than
/// folds are available.
pub fn tune_on_table(
    table: &FingerprintTable,
    labels: &[&AppLabel],
    rows: &[usize],
    cfg: &TuningConfig,
) -> Result<TuningResult> {
    cfg.validate()?;
    if rows.len() < 2 {
        return Err(Error::TooFewExecutions {
            folds: cfg.folds,
            executions: rows.len(),
        });
    }
    let k = cfg.folds.min(rows.len());
    let sub_labels: Vec<&AppLabel> = rows.iter().map(|&r| labels[r]).collect();
    let plan = fold_plan(&sub_labels, k, cfg.seed)?;

    let jobs: Vec<(usize, usize)> = (0..cfg.depths_to_search.len())
        .flat_map(|d| (0..k).map(move |f| (d, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, f)| {
            let depth = cfg.depths_to_search[d];
            let train: Vec<usize> = plan.train(f, rows.len()).into_iter().map(|i| rows[i]).collect();
            let validate: Vec<usize> = plan.validate[f].iter().map(|&i| rows[i]).collect();
            let efd = Efd::build_from_table(table, labels, &train, depth)?;
            let records = predict_rows(table, &efd, labels, &validate);
            Ok(f_score(&records)?.0)
        })
        .collect::<Result<_>>()?;

    let mut per_depth_scores = BTreeMap::new();
    for (d, depth) in cfg.depths_to_search.iter().enumerate() {
        let mean = scores[d * k..(d + 1) * k].iter().sum::<f64>() / k as f64;
        per_depth_scores.insert(depth.get(), mean);
    }
    // Strictly greater keeps the smallest depth on ties.
    let mut chosen = cfg.depths_to_search[0];
    for depth in &cfg.depths_to_search {
        if per_depth_scores[&depth.get()] > per_depth_scores[&chosen.get()] {
            chosen = *depth;
        }
    }
    Ok(TuningResult {
        chosen_depth: chosen,
        per_depth_scores,
        folds_used: k,
        stratified: plan.stratified,
    })
}

fn predict_rows(table: &FingerprintTable, efd: &Efd, labels: &[&AppLabel], rows: &[usize]) -> Vec<PredictionRecord> {
    rows.iter()
        .map(|&r| {
            let predicted = if table.has_metric(r) {
                efd.recognize_fingerprints(&table.fingerprints(r, efd.depth()))
                    .predicted()
                    .to_string()
            } else {
                UNKNOWN.to_string()
            };
            PredictionRecord {
                execution_id: r.to_string(),
                truth_app: labels[r].application_name().to_string(),
                predicted_app: predicted,
            }
        })
        .collect()
}
