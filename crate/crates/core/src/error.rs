use thiserror::Error;

use crate::candidate::Metric;
use crate::workflow::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid workflow: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("workflow contains a cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("node pool has {available} nodes but {needed} were requested")]
    InsufficientPool { needed: usize, available: usize },

    #[error("no location known for endpoint `{0}`")]
    UnknownLocation(String),

    #[error("invalid coordinate ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("duplicate region id `{0}`")]
    DuplicateRegion(String),

    #[error("region catalog is empty")]
    EmptyCatalog,

    #[error("metric `{0}` listed more than once")]
    DuplicateMetric(Metric),

    #[error("no metrics requested")]
    NoMetrics,

    #[error("no {metric} measurement for {src} -> {dst}")]
    MissingMeasurement {
        src: String,
        dst: String,
        metric: Metric,
    },

    #[error("scores belong to different regions: `{0}` and `{1}`")]
    RegionMismatch(String, String),

    #[error("node `{node}` unreachable: {reason}")]
    NodeUnreachable { node: String, reason: String },

    #[error("expected a positive value, got {0}")]
    NonPositive(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("http: {0}")]
    Http(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        if err.is_io() {
            return Error::Io(err.into());
        }
        Error::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
