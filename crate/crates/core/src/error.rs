use thiserror::Error;

/// Errors produced by trajectory construction, scenario I/O, and the solver.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is unusable (e.g. too few quadrature samples).
    #[error("config error: {0}")]
    Config(String),

    /// A scenario field failed validation; `field` is the JSON path.
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },

    /// The requested construction has no feasible solution.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The solver could not proceed (e.g. non-finite objective at start).
    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
