use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid application label {0:?}: expected <application>_<input size>")]
    InvalidLabel(String),

    #[error("invalid series {metric}/node {node}: {reason}")]
    InvalidSeries {
        metric: String,
        node: usize,
        reason: String,
    },

    #[error("execution {execution_id}: duplicate series for {metric}/node {node}")]
    DuplicateSeries {
        execution_id: String,
        metric: String,
        node: usize,
    },

    #[error("execution {execution_id}: node {node} out of range (node_count {node_count})")]
    NodeOutOfRange {
        execution_id: String,
        node: usize,
        node_count: usize,
    },

    #[error("invalid execution {execution_id}: {reason}")]
    InvalidExecution { execution_id: String, reason: String },

    #[error("duplicate execution id {0:?}")]
    DuplicateExecution(String),

    #[error("execution {0:?} has no label")]
    UnlabeledExecution(String),

    #[error("rounding depth must be at least 1, got {0}")]
    InvalidDepth(u32),

    #[error("cannot round non-finite value {0}")]
    NonFinite(f64),

    #[error("invalid decimal {0:?}")]
    InvalidDecimal(String),

    #[error("invalid interval {0:?}: expected [start:end] with start < end")]
    InvalidInterval(String),

    #[error("invalid fingerprint {0:?}")]
    InvalidFingerprint(String),

    #[error("no samples for {metric}/node {node} in window {interval}")]
    WindowDataMissing {
        metric: String,
        node: usize,
        interval: String,
    },

    #[error("fingerprint {fingerprint} does not belong to dictionary for {metric} {interval}")]
    KeyMismatch {
        fingerprint: String,
        metric: String,
        interval: String,
    },

    #[error("metric {0:?} not present in any training execution")]
    MetricNotFound(String),

    #[error("execution {execution_id} has no series for metric {metric:?}")]
    MetricAbsent { execution_id: String, metric: String },

    #[error("dictionary line {line}: {reason}")]
    DictionaryFormat { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot split {executions} executions into {folds} folds")]
    TooFewExecutions { folds: usize, executions: usize },

    #[error("cannot score an empty set of predictions")]
    EmptyRecords,

    #[error("{experiment}: {reason}")]
    Precondition { experiment: String, reason: String },

    #[error("{}{}: {reason}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Ingest {
        path: PathBuf,
        line: Option<usize>,
        reason: String,
    },

    #[error("invalid synthetic spec field {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn ingest(path: impl Into<PathBuf>, line: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
