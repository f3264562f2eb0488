use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed shapes: non-square matrices, length mismatches.
    #[error("structural error: {0}")]
    Structural(String),

    /// Inputs that are well-formed but violate a precondition.
    #[error("input error: {0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// True for errors caused by the caller's data rather than a failed check.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Structural(_) | Error::Input(_) | Error::Unsupported(_) | Error::Json(_)
        )
    }
}
