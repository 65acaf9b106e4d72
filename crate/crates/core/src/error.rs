use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain on which a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Population grew beyond the hard cap; carries the replicate index when known.
    #[error("population cap of {cap} particles exceeded (replicate {replicate:?})")]
    Resource { cap: usize, replicate: Option<u64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Solver internal failure, e.g. the front leaving the computational window.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("empty population")]
    EmptyPopulation,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
