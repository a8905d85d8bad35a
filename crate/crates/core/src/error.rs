use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid edge ({i}, {j}) for a graph on {n} vertices")]
    InvalidEdge { i: usize, j: usize, n: usize },

    #[error("{what} of size {size} exceeds the enumeration budget of {budget}")]
    BudgetExceeded {
        what: &'static str,
        size: usize,
        budget: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("activity {lambda} exceeds 1/Δ = {bound} for the hard-core host")]
    HardcoreRegime { lambda: f64, bound: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
