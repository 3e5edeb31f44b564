use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("batch too small for batch statistics: {op} needs at least {needed} rows, got {got}")]
    BatchTooSmall {
        op: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("training batch is missing the {0} domain")]
    MissingDomain(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("stale tape: backward already ran on this recording")]
    StaleTape,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("class {class} has no ground-truth instances")]
    EmptyClass { class: usize },

    #[error("class {class} has {got} samples, at least {needed} are required for a 72/8/20 split")]
    ClassTooSmall {
        class: usize,
        got: usize,
        needed: usize,
    },

    #[error("category shift: class `{class}` exists only in the {domain} domain")]
    CategoryShift { class: String, domain: &'static str },

    #[error("unknown or already labeled sample id {0}")]
    UnknownId(usize),

    #[error("pool exhausted in round {round}: {needed} samples requested, {available} unlabeled left")]
    PoolExhausted {
        round: usize,
        needed: usize,
        available: usize,
    },

    #[error("missing data for {0}")]
    MissingCell(String),

    #[error("all grid cells failed; last error: {0}")]
    AllCellsFailed(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
