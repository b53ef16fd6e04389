use std::fmt;
use std::process::ExitCode;

/// Failure of a subcommand before its checks could be evaluated.
#[derive(Debug)]
pub enum CliError {
    /// Invalid arguments, config, or files; exit code 2.
    Usage(String),
    /// A numerical routine failed; exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Numeric(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<thinshell::Error> for CliError {
    fn from(e: thinshell::Error) -> Self {
        use thinshell::Error as E;
        match e {
            E::Numeric { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
