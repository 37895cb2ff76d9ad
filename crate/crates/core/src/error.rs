use thiserror::Error;

use num_complex::Complex64 as C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or truncation setting violates its contract.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operands with mismatched space tags or dimensions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A truncated coherent state or embedding leaks too much weight out of
    /// the retained basis.
    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),

    #[error("state is not a valid density matrix: {0}")]
    InvalidDensity(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("self-consistent coherent amplitude did not converge for m = {m} after {iterations} iterations (last iterates {last:?}, {previous:?})")]
    NoConvergence {
        m: usize,
        iterations: usize,
        last: C64,
        previous: C64,
    },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("steady state for m = {m} failed: {source}")]
    Branch {
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("could not parse config at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
