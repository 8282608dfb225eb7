use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid vertex {vertex} for {family}")]
    InvalidVertex { vertex: String, family: String },

    #[error("invalid graph family: {0}")]
    InvalidFamily(String),

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule overflow: index {index} is not representable ({reason})")]
    ScheduleOverflow { index: usize, reason: String },

    #[error("operation {op} is not supported on {family}")]
    Unsupported { op: &'static str, family: String },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
