#![allow(dead_code)]

use std::collections::BTreeMap;

use efd::dictionary::UNKNOWN;
use efd::fingerprint::make_fingerprint;
use efd::synthetic::{AppSpec, InputSpec, MetricSpec, SyntheticSpec, DEFAULT_METRIC};
use efd::{Dataset, Execution, Interval, RoundingDepth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference depth-2 dictionary rows as (node, mean, labels).
pub const DEPTH2_ROWS: [(usize, &str, &str); 34] = [
    (0, "6000.0", "ft_X,ft_Y,ft_Z"),
    (1, "6000.0", "ft_X,ft_Y,ft_Z"),
    (2, "6000.0", "ft_X,ft_Y,ft_Z"),
    (3, "6000.0", "ft_X,ft_Y,ft_Z"),
    (0, "6100.0", "mg_X,mg_Y,mg_Z"),
    (1, "6100.0", "mg_X,mg_Y,mg_Z"),
    (2, "6100.0", "mg_X,mg_Y,mg_Z"),
    (3, "6100.0", "mg_X,mg_Y,mg_Z"),
    (0, "7600.0", "sp_X,sp_Y,sp_Z,bt_X,bt_Y,bt_Z"),
    (1, "7500.0", "sp_X,sp_Y,sp_Z,bt_X,bt_Y,bt_Z"),
    (2, "7500.0", "sp_X,sp_Y,sp_Z,bt_X,bt_Y,bt_Z"),
    (3, "7100.0", "sp_X,sp_Y,sp_Z,bt_X,bt_Y,bt_Z"),
    (0, "8400.0", "lu_X,lu_Y,lu_Z"),
    (1, "8300.0", "lu_X,lu_Y,lu_Z"),
    (2, "8300.0", "lu_X,lu_Y,lu_Z"),
    (3, "8300.0", "lu_X,lu_Y,lu_Z"),
    (0, "7900.0", "miniGhost_X,miniGhost_Y,miniGhost_Z"),
    (1, "7900.0", "miniGhost_X,miniGhost_Y,miniGhost_Z"),
    (2, "7900.0", "miniGhost_X,miniGhost_Y,miniGhost_Z"),
    (3, "7900.0", "miniGhost_X,miniGhost_Y,miniGhost_Z"),
    (0, "7800.0", "miniAMR_X"),
    (1, "7800.0", "miniAMR_X"),
    (2, "7800.0", "miniAMR_X"),
    (3, "7800.0", "miniAMR_X"),
    (0, "8000.0", "miniAMR_Y"),
    (1, "8000.0", "miniAMR_Y"),
    (2, "8000.0", "miniAMR_Y"),
    (3, "8000.0", "miniAMR_Y"),
    (0, "11000.0", "miniAMR_Z"),
    (1, "11000.0", "miniAMR_Z"),
    (2, "11000.0", "miniAMR_Z"),
    (3, "11000.0", "miniAMR_Z"),
    (2, "10000.0", "miniAMR_Z"),
    (1, "10000.0", "miniAMR_Z"),
];

/// Reference rows keyed by canonical fingerprint text.
pub fn depth2_golden() -> BTreeMap<String, String> {
    DEPTH2_ROWS
        .iter()
        .map(|(node, mean, labels)| (format!("{DEFAULT_METRIC}|{node}|[60:120]|{mean}"), labels.to_string()))
        .collect()
}

pub fn depth(d: u32) -> RoundingDepth {
    RoundingDepth::new(d).unwrap()
}

/// Brute-force recognition: linear scan over every training (key, label)
/// pair in training order, voting once per (node, application).
pub fn oracle_recognize(
    training: &Dataset,
    test: &Execution,
    metric: &str,
    iv: Interval,
    d: RoundingDepth,
) -> Vec<String> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for e in training.executions() {
        for node in 0..e.node_count() {
            if let Some(s) = e.series(metric, node) {
                if let Ok(fp) = make_fingerprint(s, iv, d) {
                    pairs.push((fp.to_string(), e.label().unwrap().application_name().to_string()));
                }
            }
        }
    }
    // Tie order: first appearance reading keys in order of first insertion,
    // and within a key, applications in order of first insertion.
    let mut key_order: Vec<&str> = Vec::new();
    for (k, _) in &pairs {
        if !key_order.contains(&k.as_str()) {
            key_order.push(k);
        }
    }
    let mut app_order: Vec<&str> = Vec::new();
    for k in &key_order {
        for (k2, app) in &pairs {
            if k2 == k && !app_order.contains(&app.as_str()) {
                app_order.push(app);
            }
        }
    }

    let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
    for node in 0..test.node_count() {
        let Some(s) = test.series(metric, node) else { continue };
        let Ok(fp) = make_fingerprint(s, iv, d) else { continue };
        let key = fp.to_string();
        let mut voted: Vec<&str> = Vec::new();
        for (k, app) in &pairs {
            if *k == key && !voted.contains(&app.as_str()) {
                voted.push(app);
                *votes.entry(app).or_default() += 1;
            }
        }
    }
    let best = votes.values().copied().max().unwrap_or(0);
    if best == 0 {
        return Vec::new();
    }
    app_order
        .into_iter()
        .filter(|a| votes.get(a) == Some(&best))
        .map(str::to_string)
        .collect()
}

pub fn oracle_predicted(candidates: &[String]) -> String {
    candidates.first().cloned().unwrap_or_else(|| UNKNOWN.to_string())
}

/// Random corpus spec: 3-11 apps, 1-4 inputs, 4 nodes, varied noise.
pub fn random_spec(rng: &mut ChaCha8Rng, index: u64) -> SyntheticSpec {
    let n_apps = rng.random_range(3..=11);
    let n_inputs = rng.random_range(1..=4);
    let inputs = ["X", "Y", "Z", "L"];
    let applications = (0..n_apps)
        .map(|a| AppSpec {
            name: format!("app{a}"),
            inputs: (0..n_inputs)
                .map(|i| InputSpec {
                    size: inputs[i].to_string(),
                    node_means: (0..4).map(|_| rng.random_range(500.0..20000.0f64).round()).collect(),
                })
                .collect(),
        })
        .collect();
    let noise_levels = [0.0, 1.0, 10.0, 50.0, 200.0];
    SyntheticSpec {
        applications,
        metrics: vec![MetricSpec {
            name: DEFAULT_METRIC.to_string(),
            scale: 1.0,
        }],
        repetitions: rng.random_range(2..=4),
        node_count: 4,
        noise_std: noise_levels[rng.random_range(0..noise_levels.len())],
        duration_s: 130,
        seed: 1000 + index,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
