use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh has no {0}")]
    EmptyMesh(&'static str),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("malformed token stream at index {position}: {message}")]
    Codec { position: usize, message: String },

    #[error("seam has {segments} segments, limit is {max}")]
    SequenceTooLong { segments: usize, max: usize },

    #[error("mesh carries no UV coordinates")]
    MissingUv,

    #[error("seam edge ({0}, {1}) is not an edge of the mesh")]
    SeamEdgeNotInMesh(usize, usize),

    #[error(
        "chart {chart} is not a disk: euler characteristic {euler}, {boundary_loops} boundary loop(s), genus {genus}"
    )]
    NonDiskChart { chart: usize, euler: i64, boundary_loops: usize, genus: i64 },

    #[error("solver stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("labels: {0}")]
    Labels(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training aborted at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
