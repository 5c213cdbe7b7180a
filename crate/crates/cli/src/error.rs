use std::fmt;

/// Failures grouped by the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input (exit 1).
    Config(String),
    /// A standing assumption fails (exit 2).
    Assumption(netsync::Error),
    /// Numerical, integration or I/O failure (exit 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Assumption(e) => write!(f, "{e}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<netsync::Error> for CliError {
    fn from(e: netsync::Error) -> Self {
        if e.assumption().is_some() {
            CliError::Assumption(e)
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}
