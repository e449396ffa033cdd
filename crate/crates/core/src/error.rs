use std::path::PathBuf;

use thiserror::Error;

use crate::reference::TableMode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: missing or wrong header, expected `{expected}`", path.display())]
    MissingHeader {
        path: PathBuf,
        expected: &'static str,
    },

    #[error("{}:{line}: {reason}", path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("no `yobYYYY.txt` files found in {}", dir.display())]
    NoInputFiles { dir: PathBuf },

    #[error("reference table is empty: {0}")]
    EmptyTable(String),

    #[error("cannot combine tables of mode {expected} and {found}")]
    ModeMismatch {
        expected: TableMode,
        found: TableMode,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no target name is present in the reference table")]
    NoMatchedNames,

    #[error("no names pass cutoff {cutoff}")]
    EmptyCutoffSet { cutoff: f64 },

    #[error("the {0} name pool is empty but a nonzero share was requested")]
    EmptyPool(&'static str),

    #[error("sweep references unknown table `{0}`")]
    MissingTable(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the inputs were valid but carry no usable names for an
    /// estimate (nothing matched, or a cutoff excluded everything).
    pub fn is_estimation_impossible(&self) -> bool {
        matches!(self, Error::NoMatchedNames | Error::EmptyCutoffSet { .. })
    }
}
