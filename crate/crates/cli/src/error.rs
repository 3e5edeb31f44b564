use std::path::PathBuf;

use shiftlab::Error as CoreError;

/// Exit codes, as listed in `shiftlab --help`.
pub mod exit {
    pub const OK: i32 = 0;
    /// Bad command-line arguments (reported by the argument parser).
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const DATA: i32 = 4;
    pub const IO: i32 = 5;
    pub const TRAINING: i32 = 6;
    pub const POOL_EXHAUSTED: i32 = 7;
    pub const GRID_FAILED: i32 = 8;
    pub const SIGNIFICANCE_INPUT: i32 = 9;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results file {path}: {msg}")]
    Results { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Results { .. } => exit::SIGNIFICANCE_INPUT,
            CliError::Core(e) => match e {
                CoreError::Config(_) => exit::CONFIG,
                CoreError::Io { .. } => exit::IO,
                CoreError::Empty(_)
                | CoreError::EmptyClass { .. }
                | CoreError::ClassTooSmall { .. }
                | CoreError::CategoryShift { .. }
                | CoreError::Image { .. } => exit::DATA,
                CoreError::PoolExhausted { .. } | CoreError::UnknownId(_) => exit::POOL_EXHAUSTED,
                CoreError::AllCellsFailed(_) => exit::GRID_FAILED,
                CoreError::MissingCell(_) => exit::SIGNIFICANCE_INPUT,
                _ => exit::TRAINING,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
