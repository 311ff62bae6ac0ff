use thiserror::Error;

/// Errors raised by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quantity {q} outside demand domain [0, {max}]")]
    Domain { q: f64, max: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("unit costs of markets {first} and {second} tie within 1e-12")]
    CostTie { first: usize, second: usize },

    #[error("degenerate supply: {0}")]
    Degenerate(String),

    #[error("candidate shadow-price interval is empty")]
    EmptyInterval,

    #[error("problem size {n} exceeds limit {limit} for {what}")]
    TooLarge { what: &'static str, n: usize, limit: usize },

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidInput(_) => "invalid_input",
            Error::Infeasible(_) => "infeasible",
            Error::NonConvergence { .. } => "non_convergence",
            Error::CostTie { .. } => "cost_tie",
            Error::Degenerate(_) => "degenerate",
            Error::EmptyInterval => "empty_interval",
            Error::TooLarge { .. } => "too_large",
            Error::Row { .. } => "row",
            Error::Io(_) => "io",
        }
    }

    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
