use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A bundle failed one of its structural checks. `check` is the stable
    /// name of the failed check, e.g. `"Z symmetry"`.
    #[error("validation failed [{check}]: {detail}")]
    Validation { check: String, detail: String },

    /// The bundle lacks an operator or section the operation needs.
    #[error("missing data: {0}")]
    Missing(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible word: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("logic error: {0}")]
    Logic(String),
}

impl Error {
    pub(crate) fn validation(check: &str, detail: impl Into<String>) -> Self {
        Error::Validation {
            check: check.to_string(),
            detail: detail.into(),
        }
    }

    /// Process exit code: 2 usage/config, 3 data validation, 4 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_)
            | Error::Io(_)
            | Error::Validation { .. }
            | Error::Missing(_)
            | Error::Domain(_)
            | Error::Infeasible(_) => 3,
            Error::Solver(_) | Error::Logic(_) => 4,
        }
    }

    /// Name of the failed validation check, if this is a validation error.
    pub fn check(&self) -> Option<&str> {
        match self {
            Error::Validation { check, .. } => Some(check),
            _ => None,
        }
    }
}
