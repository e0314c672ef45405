//! CLI-level errors carrying their process exit code.
//!
//! Exit codes: 0 success, 1 input error, 2 solver/rounding failure,
//! 3 verification failure.

use sparse_align::Error as LibError;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable/malformed inputs, bad flags, infeasible constraints.
    Input(String),
    /// The solver or rounding stage failed on well-formed input.
    Solver(String),
    /// The verification suite ran and at least one check failed.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        match e {
            LibError::Rounding(_) | LibError::Numerical(_) | LibError::Decomposition(_) => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
