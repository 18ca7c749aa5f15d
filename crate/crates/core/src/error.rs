use thiserror::Error;

/// Error taxonomy shared by every engine module.
///
/// `Parse`/`Validation` cover bad input files, `Argument` covers caller
/// mistakes (out-of-range parameters, mismatched shapes), and `Numeric`
/// covers failures of the numeric kernels themselves (a factorization that
/// loses positive definiteness, an eigensolver that stops converging).
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
