use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm below tolerance (zero vector)")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in vector")]
    NonFiniteValue,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Rényi order must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("all aggregation weights are zero")]
    AllZeroWeights,

    #[error("text embeddings are rank deficient: {rank} direction(s) above tolerance, need at least 2")]
    RankDeficient { rank: usize },

    #[error("projection is degenerate{}", class.map(|c| format!(" for class {c}")).unwrap_or_default())]
    DegenerateProjection { class: Option<usize> },

    #[error("no view of the example has a defined projection")]
    AllViewsDegenerate,

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("need more than k={k} examples, got {n}")]
    TooFewExamples { n: usize, k: usize },

    #[error("cannot place {classes} class means with pairwise cosine < 0.5 in dimension {dim}")]
    InfeasibleSeparation { classes: usize, dim: usize },

    #[error("bad magic bytes {0:?}, expected \"BAFT\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),

    #[error("file truncated at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("file has {extra} trailing byte(s) beyond the declared layout")]
    TrailingBytes { extra: u64 },

    #[error("non-finite float in {}", match record { Some(r) => format!("record {r}"), None => "text-embedding section".to_string() })]
    NonFinite { record: Option<u64> },

    #[error("label {label} out of range in record {record}")]
    InvalidLabel { record: u64, label: i32 },

    #[error("malformed header: {0}")]
    BadHeader(String),

    #[error("example {example_id}: {source}")]
    Record {
        example_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips any per-record context wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Record { source, .. } => source.root(),
            other => other,
        }
    }
}
