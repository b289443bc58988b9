//! Exit-code policy: 0 success, 2 usage/config errors, 3 numerical failures.

use mvsde::invariant::InvariantError;
use mvsde::lyapunov::LyapunovError;
use mvsde::{MeasureError, ModelError, SimError};

#[derive(Debug)]
pub enum CliError {
    /// Usage or configuration problem (exit code 2).
    Config(String),
    /// Numerical failure during simulation (exit code 3).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFiniteState { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LyapunovError> for CliError {
    fn from(e: LyapunovError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<InvariantError> for CliError {
    fn from(e: InvariantError) -> Self {
        match e {
            InvariantError::Sim(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}
