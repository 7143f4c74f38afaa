use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the analysis and design routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I - (T/2)A is singular for sample time T = {sample_time}")]
    Singular { sample_time: f64 },

    #[error(
        "system is not self-damped (missing self-loops on states {missing_self_loops:?}); \
         only self-damped systems are supported"
    )]
    NotSelfDamped { missing_self_loops: Vec<usize> },

    #[error(
        "communication costs are directed (eta[{row}][{col}] != eta[{col}][{row}]); \
         minimum-cost directed networks are NP-hard and not supported"
    )]
    Asymmetric { row: usize, col: usize },

    #[error("{agents} agents supplied but the system has {parents} parent SCCs")]
    AgentCountMismatch { agents: usize, parents: usize },

    #[error("no agent can measure any state of parent SCC {component} (all costs infinite)")]
    InfeasibleScc { component: usize },

    #[error(
        "no finite-cost assignment: rows {rows:?} only reach columns {columns:?}"
    )]
    InfeasibleAssignment {
        rows: Vec<usize>,
        columns: Vec<usize>,
    },

    #[error(
        "finite-cost communication graph is disconnected ({} components: {components:?}); \
         use the spanning forest instead",
        components.len()
    )]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("problem size {size} exceeds the enumeration limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("design failed networked observability verification")]
    VerificationFailed,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Parse { .. } => "parse",
            Error::Singular { .. } => "singular",
            Error::NotSelfDamped { .. } => "not-self-damped",
            Error::Asymmetric { .. } => "asymmetric-costs",
            Error::AgentCountMismatch { .. } => "agent-count-mismatch",
            Error::InfeasibleScc { .. } => "infeasible-scc",
            Error::InfeasibleAssignment { .. } => "infeasible-assignment",
            Error::Disconnected { .. } => "disconnected",
            Error::SizeGuard { .. } => "size-guard",
            Error::VerificationFailed => "verification-failed",
        }
    }
}
