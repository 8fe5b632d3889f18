//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

use crate::date::YearMonth;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: required column `{column}` not found")]
    Schema { column: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error at {location}: {cause}")]
    Data { location: String, cause: String },

    #[error("window error at {date}: {cause}")]
    Window { date: YearMonth, cause: String },

    #[error("singularity error at {date}: {cause}")]
    Singularity { date: YearMonth, cause: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// An error tagged with the pipeline stage that raised it.
    #[error("[{module}] {source}")]
    Stage {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn data(location: impl ToString, cause: impl Into<String>) -> Self {
        Error::Data {
            location: location.to_string(),
            cause: cause.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Schema { .. }
            | Error::Format(_)
            | Error::Data { .. }
            | Error::Io { .. }
            | Error::Csv(_) => 3,
            Error::Window { .. } | Error::Singularity { .. } | Error::Numeric(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn in_module(module: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| match e {
            Error::Stage { .. } => e,
            other => Error::Stage {
                module,
                source: Box::new(other),
            },
        }
    }
}
