use std::fmt;

use mixrank_core::Error;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Output(std::io::Error),
}

impl CliError {
    /// 2 for bad configs, 3 for numerical failures, 4 for size-guard refusals,
    /// 1 when the output cannot be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::Numeric(_)) => 3,
            CliError::Core(Error::SizeGuard { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(e) => write!(f, "cannot write output: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
