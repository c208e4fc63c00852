use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error("degenerate split: {train} train rows and {holdout} holdout rows")]
    DegenerateSplit { train: usize, holdout: usize },

    #[error("cannot partition {rows} rows into {folds} folds")]
    TooManyFolds { folds: usize, rows: usize },

    #[error("continuous variable `{0}` is constant in the data")]
    ConstantColumn(String),

    #[error("noise magnitude must be positive, got {0}")]
    NoiseMagnitude(f64),

    #[error("cannot fit {what}: {reason}")]
    Fit { what: &'static str, reason: String },

    #[error("conditional density undefined: parent marginal is zero")]
    UndefinedConditional,

    #[error("{}: row {row}, column `{column}`: {msg}", path.display())]
    Csv {
        path: PathBuf,
        row: usize,
        column: String,
        msg: String,
    },

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("unsupported model file version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command line: 1 data, 2 config, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema(_) => 2,
            Error::Internal(_) => 3,
            Error::Fold { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            msg: err.to_string(),
        }
    }
}
