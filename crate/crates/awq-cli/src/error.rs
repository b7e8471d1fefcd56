use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure in {check}: {source}")]
    Numerical {
        check: String,
        #[source]
        source: awq::Error,
    },
    #[error("verification failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } | CliError::ChecksFailed(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    /// Wraps a library error raised while computing `check`. Parameter-domain
    /// errors are validation failures; everything else is numerical.
    pub fn from_awq(check: impl Into<String>, err: awq::Error) -> Self {
        match err {
            awq::Error::InvalidParameter(_) | awq::Error::DomainViolation(_) | awq::Error::IndexOutOfRange { .. } => {
                CliError::Validation(format!("{}: {err}", check.into()))
            }
            source => CliError::Numerical { check: check.into(), source },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
