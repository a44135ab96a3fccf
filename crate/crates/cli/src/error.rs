use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario does not parse or violates the schema; exit code 1.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical check failed; exit code 2.
    #[error("tolerance failure: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Core(symtrace::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<symtrace::Error> for CliError {
    fn from(e: symtrace::Error) -> Self {
        match e {
            symtrace::Error::Tolerance(msg) => CliError::Tolerance(msg),
            symtrace::Error::InvalidParameter(msg) => CliError::Validation(msg),
            symtrace::Error::UnknownStrategy { kind, name } => CliError::Validation(format!("unknown {kind} '{name}'")),
            symtrace::Error::Io(e) => CliError::Io(e),
            other => CliError::Core(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    /// 1 for validation, 2 for numerical tolerance, 3 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Tolerance(_) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
