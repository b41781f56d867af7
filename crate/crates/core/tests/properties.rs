mod common;

use std::collections::BTreeMap;

use common::{depth, oracle_predicted, oracle_recognize, random_spec, rng};
use efd::evaluation::{f_score, PredictionRecord};
use efd::fingerprint::window_mean;
use efd::synthetic::{generate, DEFAULT_METRIC};
use efd::tuning::fold_plan;
use efd::{tune_depth, AppLabel, CanonicalDecimal, Efd, Interval, RoundingDepth, TuningConfig};
use rand::Rng;

/// Confusion-matrix F-score computed by index arithmetic.
#[allow(clippy::needless_range_loop)]
fn oracle_f(records: &[(String, String)]) -> f64 {
    let mut classes: Vec<&str> = records.iter().flat_map(|(t, p)| [t.as_str(), p.as_str()]).collect();
    classes.sort();
    classes.dedup();
    let idx = |c: &str| classes.iter().position(|x| *x == c).unwrap();
    let n = classes.len();
    let mut m = vec![vec![0usize; n]; n];
    for (t, p) in records {
        m[idx(t)][idx(p)] += 1;
    }
    let mut total = 0.0;
    let mut count = 0;
    for c in 0..n {
        let row: usize = m[c].iter().sum();
        if row == 0 {
            continue;
        }
        let col: usize = (0..n).map(|r| m[r][c]).sum();
        let p = if col == 0 { 0.0 } else { m[c][c] as f64 / col as f64 };
        let r = m[c][c] as f64 / row as f64;
        total += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        count += 1;
    }
    total / count as f64
}

#[test]
fn f_score_matches_confusion_matrix_oracle() {
    let mut rng = rng(11);
    let classes = ["ft", "mg", "sp", "bt", "unknown"];
    for _ in 0..500 {
        let n = rng.random_range(1..60);
        let pairs: Vec<(String, String)> = (0..n)
            .map(|_| {
                let t = classes[rng.random_range(0..classes.len())].to_string();
                let p = if rng.random_bool(0.6) {
                    t.clone()
                } else {
                    classes[rng.random_range(0..classes.len())].to_string()
                };
                (t, p)
            })
            .collect();
        let records: Vec<PredictionRecord> = pairs
            .iter()
            .map(|(t, p)| PredictionRecord {
                execution_id: String::new(),
                truth_app: t.clone(),
                predicted_app: p.clone(),
            })
            .collect();
        let (f, _) = f_score(&records).unwrap();
        assert!((f - oracle_f(&pairs)).abs() < 1e-12);
    }
}

#[test]
fn recognize_matches_linear_scan() {
    let mut r = rng(5);
    for i in 0..12 {
        let spec = random_spec(&mut r, i);
        let corpus = generate(&spec).unwrap();
        let plan = fold_plan(&corpus.labels().unwrap(), 2, i).unwrap();
        let train = corpus.select(&plan.train(0, corpus.len()));
        let test = corpus.select(&plan.validate[0]);
        for d in [1, 2, 3, 5] {
            let efd = Efd::build(&train, DEFAULT_METRIC, Interval::default(), depth(d)).unwrap();
            for e in test.executions() {
                let got = efd.recognize(e).unwrap();
                let want = oracle_recognize(&train, e, DEFAULT_METRIC, Interval::default(), depth(d));
                assert_eq!(got.candidates, want, "corpus {i} depth {d} {}", e.execution_id());
            }
        }
    }
}

#[test]
fn votes_are_conserved() {
    let mut r = rng(6);
    for i in 0..6 {
        let corpus = generate(&random_spec(&mut r, i)).unwrap();
        let efd = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(2)).unwrap();
        for e in corpus.executions() {
            let rec = efd.recognize(e).unwrap();
            let mut expected = 0;
            for node in 0..e.node_count() {
                let fp = efd::make_fingerprint(e.series(DEFAULT_METRIC, node).unwrap(), efd.interval(), efd.depth())
                    .unwrap();
                if let Some(labels) = efd.lookup(&fp) {
                    let mut apps: Vec<&str> = labels.iter().map(AppLabel::application_name).collect();
                    apps.sort();
                    apps.dedup();
                    expected += apps.len();
                }
            }
            assert_eq!(rec.votes.values().sum::<usize>(), expected);
        }
    }
}

/// The `n`-th significant digit (1-based) of a canonical decimal text.
fn sig_digit(text: &str, n: usize) -> Option<char> {
    text.chars()
        .filter(char::is_ascii_digit)
        .skip_while(|c| *c == '0')
        .nth(n - 1)
}

#[test]
fn coarser_depth_keeps_matches_away_from_ties() {
    let mut r = rng(7);
    for i in 0..8 {
        let corpus = generate(&random_spec(&mut r, i)).unwrap();
        let plan = fold_plan(&corpus.labels().unwrap(), 2, 3).unwrap();
        let train = corpus.select(&plan.train(1, corpus.len()));
        let test = corpus.select(&plan.validate[1]);
        let efds: Vec<Efd> = (1..=7)
            .map(|d| Efd::build(&train, DEFAULT_METRIC, Interval::default(), depth(d)).unwrap())
            .collect();
        let apps_at = |d: u32, fp: &efd::Fingerprint| -> Vec<String> {
            efds[d as usize - 1]
                .lookup(fp)
                .map(|v| v.iter().map(|l| l.application_name().to_string()).collect())
                .unwrap_or_default()
        };
        for e in test.executions() {
            for node in 0..e.node_count() {
                let s = e.series(DEFAULT_METRIC, node).unwrap();
                for d in 2..=7 {
                    let fine = efd::make_fingerprint(s, Interval::default(), depth(d)).unwrap();
                    if sig_digit(fine.rounded_mean().text(), d as usize) == Some('5') {
                        continue;
                    }
                    let coarse = efd::make_fingerprint(s, Interval::default(), depth(d - 1)).unwrap();
                    let coarse_apps = apps_at(d - 1, &coarse);
                    for app in apps_at(d, &fine) {
                        assert!(
                            coarse_apps.contains(&app),
                            "{} node {node} depth {d}: lost {app}",
                            e.execution_id()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn coarser_depth_can_lose_a_match_at_a_tie() {
    // Training mean 7545 and test mean 7554.9 share the depth-3 key 7550.0,
    // but round apart at depth 2.
    let exec = |id: &str, app: &str, v: f64| {
        let s = efd::NodeSeries::new(DEFAULT_METRIC, 0, vec![(60.0, v)]).unwrap();
        efd::Execution::new(id, Some(AppLabel::new(app, "X").unwrap()), 1)
            .unwrap()
            .with_series([s])
            .unwrap()
    };
    let train = efd::Dataset::new(vec![exec("a", "ft", 7545.0)]).unwrap();
    let probe = exec("b", "ft", 7554.9);
    let votes = |d| {
        Efd::build(&train, DEFAULT_METRIC, Interval::default(), depth(d))
            .unwrap()
            .recognize(&probe)
            .unwrap()
            .votes
            .values()
            .sum::<usize>()
    };
    assert_eq!(votes(3), 1);
    assert_eq!(votes(2), 0);
}

#[test]
fn rebuild_is_byte_identical() {
    let mut r = rng(8);
    for i in 0..4 {
        let spec = random_spec(&mut r, i);
        let a = Efd::build(&generate(&spec).unwrap(), DEFAULT_METRIC, Interval::default(), depth(3)).unwrap();
        let b = Efd::build(&generate(&spec).unwrap(), DEFAULT_METRIC, Interval::default(), depth(3)).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(Efd::read_from(a.to_text().as_bytes()).unwrap().to_text(), a.to_text());
    }
}

#[test]
fn identity_depth_scores_like_exact_mean_matching() {
    let mut r = rng(9);
    for i in 0..4 {
        let mut spec = random_spec(&mut r, i);
        spec.noise_std = 0.0;
        spec.repetitions = 3;
        // Force some exact collisions between applications.
        let shared = spec.applications[0].inputs[0].node_means.clone();
        spec.applications[1].inputs[0].node_means = shared;
        let corpus = generate(&spec).unwrap();

        let mut cfg = TuningConfig::new(DEFAULT_METRIC);
        cfg.folds = 3;
        cfg.depths_to_search = vec![depth(1), depth(2), depth(15)];
        let result = tune_depth(&corpus, &cfg).unwrap();

        let labels = corpus.labels().unwrap();
        let plan = fold_plan(&labels, 3, cfg.seed).unwrap();
        let exact = |row: usize, node: usize| {
            let e = &corpus.executions()[row];
            CanonicalDecimal::canonicalize(window_mean(e.series(DEFAULT_METRIC, node).unwrap(), cfg.interval).unwrap())
                .unwrap()
                .text()
                .to_string()
        };
        let mut total = 0.0;
        for f in 0..3 {
            let train = plan.train(f, corpus.len());
            let mut pairs: Vec<(usize, String, &str)> = Vec::new();
            for &row in &train {
                for node in 0..4 {
                    pairs.push((node, exact(row, node), labels[row].application_name()));
                }
            }
            let mut records = Vec::new();
            for &row in &plan.validate[f] {
                // Tie order as in the dictionary: keys by first insertion,
                // then applications within a key.
                let mut keys: Vec<(usize, &str)> = Vec::new();
                for (n, k, _) in &pairs {
                    if !keys.contains(&(*n, k.as_str())) {
                        keys.push((*n, k));
                    }
                }
                let mut order: Vec<&str> = Vec::new();
                for (n, k) in &keys {
                    for (n2, k2, a) in &pairs {
                        if n2 == n && k2 == k && !order.contains(a) {
                            order.push(a);
                        }
                    }
                }
                let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
                for node in 0..4 {
                    let key = exact(row, node);
                    let mut voted = Vec::new();
                    for (n, k, a) in &pairs {
                        if *n == node && *k == key && !voted.contains(a) {
                            voted.push(*a);
                            *votes.entry(a).or_default() += 1;
                        }
                    }
                }
                let best = votes.values().copied().max().unwrap_or(0);
                let cands: Vec<String> = if best == 0 {
                    vec![]
                } else {
                    order
                        .iter()
                        .filter(|a| votes.get(*a) == Some(&best))
                        .map(|a| a.to_string())
                        .collect()
                };
                records.push((labels[row].application_name().to_string(), oracle_predicted(&cands)));
            }
            total += oracle_f(&records);
        }
        let expected = total / 3.0;
        assert!(
            (result.per_depth_scores[&15] - expected).abs() < 1e-12,
            "{result:?} vs {expected}"
        );
    }
}

#[test]
fn noisy_repetitions_multiply_fingerprints() {
    // Window mean std is noise_std / sqrt(60); at 200 it spans several
    // depth-3 buckets (width 10 around 7000), at 0 there is one key per node.
    let mut spec = efd::synthetic::eleven_app_corpus(0.0);
    spec.applications.truncate(1);
    spec.applications[0].inputs.truncate(1);
    let keys = |noise: f64| {
        let mut s = spec.clone();
        s.noise_std = noise;
        let corpus = generate(&s).unwrap();
        assert_eq!(corpus.len(), 30);
        Efd::build(
            &corpus,
            DEFAULT_METRIC,
            Interval::default(),
            RoundingDepth::new(3).unwrap(),
        )
        .unwrap()
        .len()
    };
    assert_eq!(keys(0.0), 4);
    assert!(keys(200.0) > 8);
}
