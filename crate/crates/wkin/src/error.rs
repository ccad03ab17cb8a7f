use thiserror::Error;

/// Errors raised by the library.
///
/// Each variant maps onto one of the command-line exit codes through
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A configuration file or flag could not be interpreted.
    #[error("configuration error: {0}")]
    Config(String),
    /// A quadrature, extrapolation or sampler failed its convergence test.
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    /// An enumeration or grid size exceeded its hard limit.
    #[error("size guard violated: {0}")]
    Guard(String),
    /// A persisted file did not match its expected layout.
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 2,
            Error::Guard(_) => 3,
            Error::InvalidInput(_) | Error::Config(_) | Error::Format(_) | Error::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
