use thiserror::Error;

/// Errors raised by the model, the optimizer and the analysis routines.
///
/// The variants map onto the three failure classes the CLI distinguishes:
/// bad configuration, bad input data, and numeric breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is missing, malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    /// A file could not be parsed into the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// A configuration value is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// An objective or model output turned out non-finite.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A statistical estimator is undefined for the supplied outputs.
    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
