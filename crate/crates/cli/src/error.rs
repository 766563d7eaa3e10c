//! Command failures and their process exit codes.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or flags.
    Config(String),
    /// Missing, unreadable or schema-violating data and checkpoints.
    Data(String),
    /// Solver or training failure.
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gdf_core::Error> for CliError {
    fn from(e: gdf_core::Error) -> Self {
        use gdf_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => CliError::Config(msg),
            E::Dimension { .. } | E::Contract(_) | E::NonMonotoneTimestamps { .. } => CliError::Data(msg),
            E::NonFinite(_)
            | E::Infeasible
            | E::NodeBudget { .. }
            | E::Degenerate { .. }
            | E::Divergence { .. } => CliError::Numeric(msg),
        }
    }
}
