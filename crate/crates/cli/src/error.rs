use std::fmt;
use std::process::ExitCode;

/// Failure classes of a command, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, unreadable input, or an unusable output path.
    Config(String),
    /// The numerical core gave up (underflow, sampler cap, no convergence, ...).
    Numeric(truncfit_core::Error),
    /// One or more verification checks failed.
    ChecksFailed(usize),
    /// A claim asserted by `example-1d` does not hold.
    Claim(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Claim(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} verification check(s) failed"),
            CliError::Claim(msg) => write!(f, "claim violated: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<truncfit_core::Error> for CliError {
    fn from(e: truncfit_core::Error) -> Self {
        use truncfit_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Dimension { .. } | E::SetMismatch | E::MissingDerivatives(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
