//! Execution fingerprint dictionaries.
//!
//! An execution fingerprint is the rounded mean of one metric on one node
//! over a fixed early window of a job, e.g.
//! `nr_mapped_vmstat|0|[60:120]|6000.0`. A dictionary maps fingerprints of
//! labeled training runs to the applications that produced them; a new run
//! is recognized by looking up each of its nodes and voting.
//!
//! ```
//! use efd::{Efd, Interval, RoundingDepth};
//! use efd::synthetic::{generate, seven_app_corpus, DEFAULT_METRIC};
//!
//! let corpus = generate(&seven_app_corpus()).unwrap();
//! let depth = RoundingDepth::new(3).unwrap();
//! let efd = Efd::build(&corpus, DEFAULT_METRIC, Interval::default(), depth).unwrap();
//! let sp = corpus.get("sp_X_r000").unwrap();
//! assert_eq!(efd.recognize(sp).unwrap().candidates, ["sp"]);
//! ```

pub mod dictionary;
pub mod error;
pub mod evaluation;
pub mod fingerprint;
pub mod ingestion;
pub mod model;
pub mod rounding;
pub mod synthetic;
pub mod tuning;

pub use dictionary::{BuildStats, Efd, Recognition, UNKNOWN};
pub use error::{Error, Result};
pub use evaluation::{
    f_score, metric_sweep, run_experiment, DepthChoice, ExperimentKind, ExperimentReport, PredictionRecord,
};
pub use fingerprint::{make_fingerprint, window_mean, Fingerprint, Interval};
pub use ingestion::{load_dataset, validate_dataset, write_native};
pub use model::{dataset_partition, parse_app_label, AppLabel, Dataset, Execution, NodeSeries};
pub use rounding::{round_to_depth, CanonicalDecimal, RoundingDepth};
pub use tuning::{stratified_kfold, tune_depth, TuningConfig, TuningResult};
