use bertrand_mnl::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::InvalidCatalog(_)
            | Error::InvalidAssortment(_)
            | Error::InvalidMarket(_)
            | Error::TooManyItems { .. } => CliError::Config(e.to_string()),
            Error::NoConvergence { .. } | Error::Unbounded | Error::Overflow(_) | Error::SearchBoxExhausted { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}
