use thiserror::Error;

/// Failure classes shared by every computation in the crate.
///
/// The CLI maps them onto distinct exit codes, see [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("capacity exceeded for {resource}: need {required}, budget {budget}")]
    Capacity {
        resource: &'static str,
        required: String,
        budget: String,
    },
    #[error("computational anomaly: {0}")]
    Anomaly(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn capacity(resource: &'static str, required: impl std::fmt::Display, budget: impl std::fmt::Display) -> Self {
        Error::Capacity {
            resource,
            required: required.to_string(),
            budget: budget.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Anomaly(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
