use std::io;
use std::path::PathBuf;

use fairtrip_core::trainer::TrainError;

/// Everything that can stop a command. [`Error::exit_code`] maps each
/// variant to the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that failed.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// 2 for configuration, 3 for data (including IO), 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

/// Core errors raised while loading or encoding data.
pub(crate) fn data_error(e: fairtrip_core::Error) -> Error {
    use fairtrip_core::Error as E;
    match e {
        E::NonFinite(_) => Error::Numeric(e.to_string()),
        _ => Error::Data(e.to_string()),
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Invalid(inner @ fairtrip_core::Error::InvalidArgument(_)) => Error::Config(inner.to_string()),
            TrainError::Invalid(inner) => data_error(inner),
            diverged @ TrainError::Diverged { .. } => Error::Numeric(diverged.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
