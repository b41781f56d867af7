mod common;

use std::collections::BTreeMap;

use common::{depth, depth2_golden};
use efd::synthetic::{generate, seven_app_corpus, DEFAULT_METRIC};
use efd::{tune_depth, Efd, Fingerprint, Interval, TuningConfig};

fn dump(efd: &Efd) -> BTreeMap<String, String> {
    efd.entries()
        .map(|(k, v)| {
            let labels: Vec<String> = v.iter().map(ToString::to_string).collect();
            (k.to_string(), labels.join(","))
        })
        .collect()
}

#[test]
fn depth_two_reproduces_reference_dictionary() {
    let corpus = generate(&seven_app_corpus()).unwrap();
    let efd = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(2)).unwrap();
    assert_eq!(efd.len(), 34);
    assert_eq!(dump(&efd), depth2_golden());
}

#[test]
fn reference_lookups() {
    let corpus = generate(&seven_app_corpus()).unwrap();
    let efd = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(2)).unwrap();
    let look = |k: &str| {
        let fp: Fingerprint = k.parse().unwrap();
        efd.lookup(&fp)
            .map(|v| v.iter().map(ToString::to_string).collect::<Vec<_>>())
    };
    assert_eq!(
        look("nr_mapped_vmstat|0|[60:120]|6000.0").unwrap(),
        ["ft_X", "ft_Y", "ft_Z"]
    );
    assert_eq!(
        look("nr_mapped_vmstat|0|[60:120]|7600.0").unwrap(),
        ["sp_X", "sp_Y", "sp_Z", "bt_X", "bt_Y", "bt_Z"]
    );
    assert!(look("nr_mapped_vmstat|0|[60:120]|6200.0").is_none());
}

#[test]
fn sp_bt_collision_and_resolution() {
    let corpus = generate(&seven_app_corpus()).unwrap();
    let d2 = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(2)).unwrap();
    let sp = corpus.get("sp_Y_r004").unwrap();
    let bt = corpus.get("bt_Z_r001").unwrap();
    let r = d2.recognize(sp).unwrap();
    assert_eq!(r.candidates, ["sp", "bt"]);
    assert_eq!(r.predicted(), "sp");
    assert_eq!(r.votes["sp"], 4);
    assert_eq!(r.votes["bt"], 4);
    assert_eq!(d2.recognize(bt).unwrap().predicted(), "sp");

    let d3 = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(3)).unwrap();
    assert_eq!(d3.recognize(sp).unwrap().candidates, ["sp"]);
    assert_eq!(d3.recognize(bt).unwrap().candidates, ["bt"]);
    assert!(d3.entries().all(|(_, labels)| {
        let apps: Vec<&str> = labels.iter().map(|l| l.application_name()).collect();
        !(apps.contains(&"sp") && apps.contains(&"bt"))
    }));
}

#[test]
fn tuning_picks_depth_three_on_seven_apps() {
    let corpus = generate(&seven_app_corpus()).unwrap();
    let result = tune_depth(&corpus, &TuningConfig::new(DEFAULT_METRIC)).unwrap();
    assert!(result.per_depth_scores[&2] < result.per_depth_scores[&3]);
    assert_eq!(result.chosen_depth.get(), 3, "{result:?}");
}

#[test]
fn miniamr_z_splits_across_the_boundary() {
    let spec = seven_app_corpus();
    let corpus = generate(&spec).unwrap();
    let efd = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth(2)).unwrap();
    let z_keys = efd
        .entries()
        .filter(|(_, v)| v.iter().any(|l| l.to_string() == "miniAMR_Z"))
        .count();
    // Four nodes plus the two straddling ones.
    assert_eq!(z_keys, 6);
}
