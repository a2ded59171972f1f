use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },

    #[error("invalid problem data at {field}: {reason}")]
    InvalidData { field: String, reason: String },

    #[error("malformed problem file: {0}")]
    Parse(String),

    #[error("simplex exceeded the pivot cap of {cap}")]
    MaxPivotsExceeded { cap: usize },

    /// The bounded dual of a block is infeasible, so the penalized block
    /// problem is unbounded below (mu_i = -inf).
    #[error("penalty bound too small: dual of block {block} is infeasible within 0 <= y <= t")]
    InvalidPenaltyBound { block: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("block {block}: primal and dual evaluations disagree ({primal} vs {dual})")]
    OracleMismatch { block: usize, primal: f64, dual: f64 },

    #[error("oracle failed at iteration {iteration}: {source}")]
    Oracle {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
