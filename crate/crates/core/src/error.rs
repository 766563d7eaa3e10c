use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the modelling, optimization and training layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes or vector lengths do not conform.
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// A precondition of an operation was violated.
    Contract(String),
    /// Timestamps must be strictly increasing.
    NonMonotoneTimestamps { index: usize },
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// The constraint system admits no feasible point.
    Infeasible,
    /// Branch-and-bound ran out of nodes; carries the best incumbent objective if any.
    NodeBudget { nodes: usize, incumbent: Option<f64> },
    /// The KKT system restricted to the active set is singular.
    Degenerate { hint: &'static str },
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
    /// Invalid configuration value.
    Config(String),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                context,
                expected,
                found,
            } => write!(f, "{context}: expected dimension {expected}, found {found}"),
            Error::Contract(msg) => write!(f, "contract violated: {msg}"),
            Error::NonMonotoneTimestamps { index } => {
                write!(f, "timestamps not strictly increasing at index {index}")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Infeasible => f.write_str("constraint system is infeasible"),
            Error::NodeBudget { nodes, incumbent } => match incumbent {
                Some(obj) => write!(
                    f,
                    "branch-and-bound node budget of {nodes} exhausted (incumbent objective {obj})"
                ),
                None => write!(
                    f,
                    "branch-and-bound node budget of {nodes} exhausted without incumbent"
                ),
            },
            Error::Degenerate { hint } => write!(f, "degenerate KKT system: {hint}"),
            Error::Divergence { epoch } => write!(f, "loss diverged at epoch {epoch}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
