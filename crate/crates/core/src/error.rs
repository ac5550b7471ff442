use thiserror::Error;

/// Errors raised by the library.
///
/// `Domain` and `Input` are caller mistakes (bad arguments, malformed files);
/// `Numeric` means a computation could not produce a finite answer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the CLI: 2 for usage/validation, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Input(_) | Error::Csv(_) | Error::Io(_) => 2,
            Error::Numeric(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}
