use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid metric space: {0}")]
    InvalidMetric(String),

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("invalid baton: {0}")]
    InvalidBaton(String),

    #[error("{0} is undefined for a metric space with fewer than two points")]
    TooFewPoints(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("search budget of {budget} nodes exhausted (lower bound {lower}, upper bound {upper})")]
    BudgetExhausted {
        budget: u64,
        lower: usize,
        upper: usize,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
